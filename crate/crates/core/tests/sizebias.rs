use proptest::prelude::*;
use rand::Rng;
use rrgap::sizebias::*;
use rrgap::RngStream;

fn h(x: f64) -> f64 {
    bennett_h(x).unwrap()
}

#[test]
fn h_convex_and_flat_at_zero() {
    let grid: Vec<f64> = (0..=2000).map(|i| -1.0 + 51.0 * i as f64 / 2000.0).collect();
    for w in grid.windows(3) {
        assert!(h(w[1]) <= (h(w[0]) + h(w[2])) / 2.0 + 1e-12);
    }
    // h'(0) = 0 through a symmetric difference quotient
    let e = 1e-6;
    assert!(((h(e) - h(-e)) / (2.0 * e)).abs() < 1e-9);
    assert_eq!(h(0.0), 0.0);
}

#[test]
fn weak_forms_dominate() {
    let mut rng = RngStream::new(1, 0).rng();
    for _ in 0..1000 {
        let bp = BoundParams::new(rng.random_range(0.1..5.0), rng.random_range(0.05..1.0), rng.random_range(0.1..50.0)).unwrap();
        let x = rng.random_range(0.0..100.0);
        let u = tail_bound_upper(&bp, x).unwrap();
        assert!(u.strong <= u.weak + 1e-15);
        let xl = rng.random_range(0.0..1.0) * bp.lower_center();
        let l = tail_bound_lower(&bp, xl).unwrap();
        assert!(l.strong <= l.weak + 1e-15);
    }
}

#[test]
fn bennett_reduces_to_mean_form() {
    let mut rng = RngStream::new(2, 0).rng();
    for _ in 0..1000 {
        let (p, mu): (f64, f64) = (rng.random_range(0.05..1.0), rng.random_range(0.1..50.0));
        let x: f64 = rng.random_range(0.0..60.0);
        let bp = BoundParams::<f64>::new(1.0, p, mu).unwrap();
        let bb = BennettParams::<f64>::new(1.0, p, mu, mu).unwrap();
        let a = bennett_bound_upper(&bb, x).unwrap();
        let b = tail_bound_upper(&bp, x).unwrap().strong;
        assert!((a - b).abs() <= 1e-12 * b.max(f64::MIN_POSITIVE) || (a == 0.0 && b == 0.0), "{a} {b}");
    }
    // c = p = 1 gives Bennett's inequality exp(-τ² h(x/τ²)) on both sides
    let bb = BennettParams::<f64>::new(1.0, 1.0, 10.0, 3.0).unwrap();
    for x in [0.0, 0.5, 2.0, 7.0] {
        let want = (-3.0 * h(x / 3.0)).exp();
        assert!((bennett_bound_lower(&bb, x).unwrap() - want).abs() < 1e-15);
        assert!((bennett_bound_upper(&bb, x).unwrap() - want).abs() < 1e-15);
    }
    let unit = BennettParams::<f64>::new(1.0, 1.0, 5.0, 1.0).unwrap();
    assert!((bennett_bound_lower(&unit, 1.0).unwrap() - std::f64::consts::E / 4.0).abs() < 1e-15);
}

#[test]
fn bounds_nonincreasing() {
    let bp = BoundParams::new(1.5, 0.6, 8.0).unwrap();
    let bb = BennettParams::new(1.5, 0.6, 8.0, 5.0).unwrap();
    let up: Vec<f64> = (0..500).map(|i| i as f64 * 0.1).collect();
    let lo: Vec<f64> = (0..500).map(|i| i as f64 / 500.0 * bp.lower_center()).collect();
    let series: [Vec<f64>; 4] = [
        up.iter().map(|&x| tail_bound_upper(&bp, x).unwrap().strong).collect(),
        lo.iter().map(|&x| tail_bound_lower(&bp, x).unwrap().strong).collect(),
        up.iter().map(|&x| bennett_bound_upper(&bb, x).unwrap()).collect(),
        lo.iter().map(|&x| bennett_bound_lower(&bb, x).unwrap()).collect(),
    ];
    for s in &series {
        assert!(s.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(s[0], 1.0);
    }
}

#[test]
fn upper_tail_iteration_for_poisson_mixture() {
    // X = B·Z with B ~ Bernoulli(1/2), Z ~ Poisson(λ); the coupling is (1, 1/2)-bounded
    let lambda = 5.0;
    let pois = truncated_poisson(lambda).unwrap();
    let atoms: Vec<(f64, f64)> = std::iter::once((0.0, 0.5))
        .chain(pois.atoms().iter().map(|&(z, w)| (z, w / 2.0)))
        .collect();
    let x_law = DiscreteDist::new(atoms).unwrap();
    let mu = x_law.mean();
    assert!((mu - lambda / 2.0).abs() < 1e-9);
    let (c, p) = (1.0, 0.5);
    let ge = |t: f64| x_law.atoms().iter().filter(|a| a.0 >= t).map(|a| a.1).sum::<f64>();
    for i in 1..=80 {
        let x = i as f64 * 0.5;
        assert!(ge(x) <= mu / (p * x) * ge(x - c) + 1e-15, "x = {x}");
    }
}

#[test]
fn sizebias_identity_exact() {
    let mut rng = RngStream::new(3, 0).rng();
    for _ in 0..50 {
        let k = rng.random_range(2..8);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let dist = DiscreteDist::new((0..k).map(|i| (i as f64 * 0.7, raw[i] / total)).collect()).unwrap();
        let sb = sizebias_discrete(&dist).unwrap();
        assert!((sb.total_mass() - 1.0).abs() < 1e-12);
        for j in 0..20 {
            let a = j as f64 * 0.1 - 1.0;
            let f = |x: f64| (a * x).exp() + x.sin();
            let lhs = dist.expect(|x| x * f(x));
            let rhs = dist.mean() * sb.expect(f);
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        }
    }
}

#[test]
fn sum_index_law() {
    let mut rng = RngStream::new(4, 0).rng();
    let draws = 40_000;
    let mut counts = [0u64; 4];
    for _ in 0..draws {
        counts[sizebias_sum_index(&[1.0; 4], &mut rng).unwrap()] += 1;
    }
    let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
    assert!(counts.iter().all(|&c| (c as f64 - draws as f64 / 4.0).abs() <= 3.0 * sigma));
    let second = (0..draws).filter(|_| sizebias_sum_index(&[1.0, 3.0], &mut rng).unwrap() == 1).count();
    let sigma = (draws as f64 * 0.75 * 0.25).sqrt();
    assert!((second as f64 - 0.75 * draws as f64).abs() <= 3.0 * sigma);
    assert_eq!(sizebias_sum_index(&[2.5], &mut rng).unwrap(), 0);
    assert!(sizebias_sum_index(&[1.0, 0.0], &mut rng).is_err());
}

#[test]
fn scenarios_hold_and_are_deterministic() {
    for name in Scenario::NAMES {
        let sc = Scenario::from_name(name).unwrap();
        let a = scenario(&sc, 5000, 9, None).unwrap();
        assert_eq!(a.violations(), 0, "{name}: {:?}", a.checks);
        assert_eq!(a, scenario(&sc, 5000, 9, None).unwrap());
        assert!(a.tails.iter().all(|t| t.empirical_ccdf.windows(2).all(|w| w[1] <= w[0])));
        // the size-biased mean exceeds the mean
        assert!(a.mean_x_s >= a.mean_x);
    }
    assert!(Scenario::from_name("nope").is_err());
}

proptest! {
    #[test]
    fn h_homogeneity(p in 1e-3f64..=1.0, x in 0.0f64..50.0) {
        prop_assert!(h(p * x) / p >= p * h(x) - 1e-12);
    }

    #[test]
    fn h_lower_bounds(x in 0.0f64..1e3, y in -1.0f64..=0.0) {
        prop_assert!(h(x) >= x * x / (2.0 * (1.0 + x / 3.0)) - 1e-12);
        prop_assert!(h(y) >= y * y / 2.0 - 1e-12);
    }
}
