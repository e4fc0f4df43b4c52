use std::collections::HashMap;

use rand::Rng;
use rrgap::perm::Permutation;
use rrgap::samplers::*;
use rrgap::{GraphModel, RngStream};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square p-value of `counts` against the probabilities `probs`.
fn chi_square_p(counts: &[u64], probs: &[f64]) -> f64 {
    let total: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(probs)
        .map(|(&c, &p)| {
            let e = p * total as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

fn uniform_over_enumeration(n: usize, d: usize, draws: u64, seed: u64) -> f64 {
    let all = regular_bits(n, d).unwrap();
    let index: HashMap<u64, usize> = all.iter().enumerate().map(|(i, &b)| (b, i)).collect();
    let mut counts = vec![0u64; all.len()];
    let mut rng = RngStream::new(seed, 0).rng();
    for _ in 0..draws {
        let a = sample_uniform_simple(n, d, &mut rng).unwrap();
        counts[index[&adjacency_bits(&a)]] += 1;
    }
    chi_square_p(&counts, &vec![1.0 / all.len() as f64; all.len()])
}

#[test]
fn five_cycles_and_k5() {
    let mut rng = RngStream::new(1, 0).rng();
    let all = regular_bits(5, 2).unwrap();
    assert_eq!(all.len(), 12);
    let mut counts = vec![0u64; 12];
    for _ in 0..12_000 {
        let b = adjacency_bits(&sample_uniform_simple(5, 2, &mut rng).unwrap());
        counts[all.iter().position(|&x| x == b).unwrap()] += 1;
    }
    let sigma = (12_000.0f64 * (1.0 / 12.0) * (11.0 / 12.0)).sqrt();
    assert!(counts.iter().all(|&c| (c as f64 - 1000.0).abs() <= 3.0 * sigma), "{counts:?}");
    assert!(chi_square_p(&counts, &[1.0 / 12.0; 12]) > 1e-3);
    for _ in 0..20 {
        assert_eq!(sample_uniform_simple(5, 4, &mut rng).unwrap(), rrgap::AdjacencyMatrix::complete(5));
    }
}

#[test]
fn enumeration_path_is_uniform() {
    assert!(uniform_over_enumeration(6, 3, 100_000, 2) > 1e-3);
}

#[test]
fn pairing_path_is_uniform() {
    // n = 9 is past the enumeration threshold, so this goes through pairing
    assert_eq!(SamplerPath::for_params(9, 2), SamplerPath::Pairing);
    assert!(uniform_over_enumeration(9, 2, 60_000, 3) > 1e-3);
}

#[test]
fn edge_marginals_all_paths() {
    for &(n, d, draws) in &[(8usize, 3usize, 10_000u64), (20, 4, 10_000), (14, 6, 4_000)] {
        let mut rng = RngStream::new(4, n as u64).rng();
        let mut hits = 0u64;
        for _ in 0..draws {
            let a = sample_uniform_simple(n, d, &mut rng).unwrap();
            assert!(a.is_simple() && a.is_regular(d as u64));
            hits += u64::from(a.get(0, 1) == 1);
        }
        let p = d as f64 / (n - 1) as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - p * draws as f64).abs() <= 3.0 * sigma, "n={n} d={d}: {hits}");
    }
}

#[test]
fn random_instances_are_regular_and_simple() {
    let mut rng = RngStream::new(5, 0).rng();
    let mut done = 0;
    while done < 10_000 {
        let n = rng.random_range(5..30);
        let d = rng.random_range(1..n);
        if n * d % 2 == 1 {
            continue;
        }
        let a = sample_uniform_simple_with(n, d, &SamplerOptions { burn_in_factor: 5, ..Default::default() }, &mut rng)
            .unwrap()
            .0;
        assert!(a.is_simple() && a.is_regular(d as u64), "n={n} d={d}");
        done += 1;
    }
}

fn perm_law(kind: PermKind, n: usize, draws: u64) -> f64 {
    let states: Vec<Permutation> = Permutation::all(n)
        .into_iter()
        .filter(|p| match kind {
            PermKind::Uniform => true,
            PermKind::FpfInvolution => p.is_involution() && !p.has_fixed_point(),
            PermKind::LongCycle => p.cycle_type() == vec![n],
        })
        .collect();
    let mut counts = vec![0u64; states.len()];
    let mut rng = RngStream::new(6, n as u64).rng();
    for _ in 0..draws {
        let p = sample_perm(n, kind, &mut rng).unwrap();
        counts[states.iter().position(|s| *s == p).unwrap()] += 1;
    }
    chi_square_p(&counts, &vec![1.0 / states.len() as f64; states.len()])
}

#[test]
fn permutation_samplers_are_uniform() {
    let mut rng = RngStream::new(7, 0).rng();
    assert_eq!(sample_fpf_involution(2, &mut rng).unwrap().images(), &[1, 0]);
    assert_eq!(sample_long_cycle(2, &mut rng).unwrap().images(), &[1, 0]);
    assert!(perm_law(PermKind::FpfInvolution, 4, 3000) > 1e-3);
    assert!(perm_law(PermKind::FpfInvolution, 6, 15_000) > 1e-3);
    assert!(perm_law(PermKind::LongCycle, 3, 2000) > 1e-3);
    assert!(perm_law(PermKind::LongCycle, 4, 6000) > 1e-3);
    assert!(perm_law(PermKind::Uniform, 4, 24_000) > 1e-3);
}

#[test]
fn permutation_models_marginals() {
    let (n, d, draws) = (10usize, 4usize, 10_000u64);
    for model in [GraphModel::FpfInvolution { n, d }, GraphModel::LongCycle { n, d }] {
        let mut rng = RngStream::new(8, 0).rng();
        let mut sum = 0u64;
        let mut sum_sq = 0u64;
        for _ in 0..draws {
            let a = model.sample(&mut rng).unwrap();
            assert!((0..n).all(|u| a.get(u, u) == 0));
            assert!(a.is_regular(d as u64));
            let x = a.get(2, 7) as u64;
            sum += x;
            sum_sq += x * x;
        }
        let mean = sum as f64 / draws as f64;
        let var = sum_sq as f64 / draws as f64 - mean * mean;
        let want = d as f64 / (n - 1) as f64;
        assert!((mean - want).abs() <= 3.0 * (var / draws as f64).sqrt(), "{model:?}: {mean}");
    }
    // uniform permutations put loops on the diagonal with mean d/n
    let mut rng = RngStream::new(9, 0).rng();
    let loops: u64 = (0..draws)
        .map(|_| GraphModel::UniformPermutation { n, d }.sample(&mut rng).unwrap().get(0, 0) as u64)
        .sum();
    assert!((loops as f64 / draws as f64 - d as f64 / n as f64).abs() < 0.05);
}

#[test]
fn er_mean_edge_count() {
    let mut rng = RngStream::new(10, 0).rng();
    let draws = 10_000;
    let total: u64 = (0..draws).map(|_| sample_er(20, 0.5, &mut rng).unwrap().edges().len() as u64).sum();
    let sigma = (draws as f64 * 190.0 * 0.25).sqrt();
    assert!((total as f64 - 95.0 * draws as f64).abs() <= 3.0 * sigma);
}

#[test]
fn streams_are_reproducible() {
    for model in [
        GraphModel::UniformSimple { n: 40, d: 10 },
        GraphModel::UniformSimple { n: 30, d: 3 },
        GraphModel::LongCycle { n: 9, d: 4 },
        GraphModel::ErdosRenyi { n: 12, p: 0.3 },
    ] {
        let a: Vec<_> = (0..5).map(|i| model.sample(&mut RngStream::new(11, i).rng()).unwrap()).collect();
        let b: Vec<_> = (0..5).map(|i| model.sample(&mut RngStream::new(11, i).rng()).unwrap()).collect();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
    }
}
