use rand::Rng;
use rrgap::graph::{linear_form, linear_form_stats};
use rrgap::perm::Permutation;
use rrgap::report::linspace;
use rrgap::samplers::{sample_perm, sample_permutation_model_with_perms};
use rrgap::utp::*;
use rrgap::{DenseMatrix, GraphModel, PermKind, RngStream};

fn random_q<R: Rng>(n: usize, rng: &mut R) -> DenseMatrix<f64> {
    let mut q = DenseMatrix::zeros(n);
    for u in 0..n {
        for v in u + 1..n {
            let x = rng.random::<f64>();
            q.set(u, v, x);
            q.set(v, u, x);
        }
    }
    q
}

#[test]
fn exact_reports_hold_for_small_uniform_models() {
    let mut rng = RngStream::new(21, 0).rng();
    for n in 5..=8 {
        for d in 2..n - 2 {
            if n * d % 2 == 1 {
                continue;
            }
            let mut qs = vec![random_q(n, &mut rng), disjoint_set_pair(n, n / 4).unwrap().2];
            if n / 4 == 0 {
                qs.pop();
            }
            for q in qs {
                let stats = linear_form_stats(&q, &GraphModel::UniformSimple { n, d }.expected_matrix()).unwrap();
                let grid = linspace(0.0, 4.0 * stats.sigma_tilde_sq.sqrt() + 4.0 * stats.a, 25);
                let r = exact_tail_report(n, d, &q, &grid).unwrap();
                assert!(r.exact);
                assert_eq!(r.violations(), 0, "n={n} d={d}");
                let law = exact_uniform_law(n, d, &q).unwrap();
                let mean: f64 = law.iter().map(|&(x, w)| x * w).sum();
                assert!((mean - stats.mu).abs() < 1e-9 * stats.mu.max(1.0));
            }
        }
    }
    assert!(exact_uniform_law(9, 4, &DenseMatrix::zeros(9)).is_err());
}

#[test]
fn desymmetrized_form_matches() {
    let mut rng = RngStream::new(22, 0).rng();
    for kind in [PermKind::Uniform, PermKind::FpfInvolution, PermKind::LongCycle] {
        for _ in 0..200 {
            let (a, perms) = sample_permutation_model_with_perms(12, 6, kind, &mut rng).unwrap();
            let q = random_q(12, &mut rng);
            let lhs = desymmetrized_form(&q, &perms);
            assert!((lhs - linear_form(&q, &a).unwrap()).abs() < 1e-10);
        }
    }
}

#[test]
fn mc_reports() {
    let model = GraphModel::UniformPermutation { n: 30, d: 6 };
    let zero = mc_tail_report(&model, &DenseMatrix::zeros(30), &[0.0, 1.0], 200, 1).unwrap();
    assert_eq!(zero.violations(), 0);
    assert_eq!(zero.upper.empirical_ccdf[1], 0.0);
    assert!(mc_tail_report(&model, &random_q(30, &mut RngStream::new(1, 0).rng()), &[0.0], 50, 1).is_err());
    let q = disjoint_set_pair(30, 8).unwrap().2;
    let grid = linspace(0.0, 40.0, 25);
    let r = mc_tail_report(&model, &q, &grid, 2000, 23).unwrap();
    assert!(!r.exact);
    assert_eq!(r.violations(), 0);
    assert_eq!(r.upper.grid.len(), 25);
    assert_eq!(r, mc_tail_report(&model, &q, &grid, 2000, 23).unwrap());
}

#[test]
fn uniform_parameters_identity() {
    for n in (10..200).step_by(7) {
        for d in (1..n / 2).filter(|d| n * d % 2 == 0) {
            let p: f64 = p_upper(n, d);
            let params = utp_params::<f64>(&GraphModel::UniformSimple { n, d }).unwrap();
            assert!((params.c0 - p / 6.0).abs() < 1e-15);
            assert!((params.gamma0 - (1.0 / p - 1.0)).abs() < 1e-12 * (1.0 + params.gamma0));
        }
    }
    let perm = utp_params::<f64>(&GraphModel::UniformPermutation { n: 10, d: 4 }).unwrap();
    assert_eq!((perm.c0, perm.gamma0), (0.25, 0.0));
    let fpf = utp_params::<f64>(&GraphModel::FpfInvolution { n: 10, d: 4 }).unwrap();
    assert_eq!((fpf.c0, fpf.gamma0), (0.125, 0.0));
    assert!(utp_params::<f64>(&GraphModel::ErdosRenyi { n: 10, p: 0.5 }).is_err());
}

#[test]
fn couplings_hit_target_and_keep_cycle_type() {
    let mut rng = RngStream::new(24, 0).rng();
    let n = 10;
    for i in 0..1000 {
        let kind = if i % 2 == 0 { PermKind::FpfInvolution } else { PermKind::LongCycle };
        let pi = sample_perm(n, kind, &mut rng).unwrap();
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u == v {
            assert!(coupled_perm_conjinv(&pi, u, v).is_err());
            continue;
        }
        let out = coupled_perm_conjinv(&pi, u, v).unwrap();
        assert_eq!(out.apply(u), v);
        assert_eq!(out.cycle_type(), pi.cycle_type());
        let unif = coupled_perm_uniform(&pi, u, v);
        assert_eq!(unif.apply(u), v);
    }
    assert!(coupled_perm_conjinv(&Permutation::identity(4), 0, 1).is_err());
}

#[test]
fn exact_coupling_tv_is_zero() {
    use num_traits::Zero;
    let all = Permutation::all(5);
    for (u, v) in [(0, 0), (0, 3), (2, 1)] {
        assert!(perm_coupling_tv(&all, PermKind::Uniform, u, v).unwrap().is_zero());
    }
    let fpf: Vec<Permutation> = Permutation::all(6).into_iter().filter(|p| p.is_involution() && !p.has_fixed_point()).collect();
    assert_eq!(fpf.len(), 15);
    assert!(perm_coupling_tv(&fpf, PermKind::FpfInvolution, 0, 4).unwrap().is_zero());
}

#[test]
fn h_form_beats_bernstein() {
    let model = GraphModel::UniformSimple { n: 40, d: 6 };
    let params = utp_params::<f64>(&model).unwrap();
    let q = random_q(40, &mut RngStream::new(25, 0).rng());
    let stats = linear_form_stats(&q, &model.expected_matrix()).unwrap();
    for t in linspace(0.0, 500.0, 200) {
        let sharp = utp_bound(&params, &stats, t).unwrap();
        assert!(sharp <= utp_bound_bernstein(&params, &stats, t).unwrap() / 2.0 * (1.0 + 1e-12));
    }
    let big = 50.0 * stats.sigma_tilde_sq / stats.a;
    assert!(utp_bound(&params, &stats, big).unwrap() < utp_bound_bernstein(&params, &stats, big).unwrap() / 2.0);
}

#[test]
fn validation_shapes() {
    let v = utp_validate(&GraphModel::UniformSimple { n: 20, d: 4 }, &QClass::ALL, 100, 3).unwrap();
    assert_eq!(v.len(), QClass::ALL.len());
    for r in &v {
        assert!(r.uniform.is_some());
        assert_eq!(r.edge_counts.is_some(), r.q_class == QClass::SetPair);
        assert_eq!(r.utp.upper.grid.len(), 25);
        assert_eq!(r.violations(), 0);
    }
    let p = utp_validate(&GraphModel::LongCycle { n: 20, d: 4 }, &[QClass::Random], 100, 3).unwrap();
    assert!(p[0].uniform.is_none() && p[0].edge_counts.is_none());
    assert!(utp_validate(&GraphModel::LongCycle { n: 20, d: 4 }, &[QClass::Random], 99, 3).is_err());
    assert_eq!(QClass::from_name("setpair").unwrap(), QClass::SetPair);
    assert!(QClass::from_name("dense").is_err());
}
