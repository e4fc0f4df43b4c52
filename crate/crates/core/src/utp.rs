//! Uniform tails property: parameters per model, the tail bound for linear
//! forms `f_Q(A)`, the sharper bounds for uniform regular graphs, the two
//! permutation couplings, and Monte Carlo validation.

use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{linear_form, linear_form_stats, set_pair_matrix, DenseMatrix, LinearFormStats, VertexSet};
use crate::perm::Permutation;
use crate::report::{TailReport, TailSide};
use crate::rng::RngStream;
use crate::samplers::{from_adjacency_bits, regular_bits, GraphModel, PermKind};
use crate::scalar::Real;
use crate::sizebias::bennett_h;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtpParams<T> {
    pub c0: T,
    pub gamma0: T,
}

impl<T: Real> UtpParams<T> {
    pub fn new(c0: T, gamma0: T) -> Result<Self> {
        if !(c0 > T::zero()) {
            return Err(Error::Domain { value: c0.as_f64(), domain: "c0 > 0" });
        }
        if !(gamma0 >= T::zero()) {
            return Err(Error::Domain { value: gamma0.as_f64(), domain: "gamma0 >= 0" });
        }
        Ok(Self { c0, gamma0 })
    }
}

/// `p = 1 - (d+1)/(n-1)`, the upper-tail success probability of the
/// switching coupling.
pub fn p_upper<T: Real>(n: usize, d: usize) -> T {
    T::one() - T::from_count(d as u64 + 1) / T::from_count(n as u64 - 1)
}

/// `p' = 1 - (d+1)/(n-d-1)`, the lower-tail success probability.
pub fn p_lower<T: Real>(n: usize, d: usize) -> T {
    T::one() - T::from_count(d as u64 + 1) / (T::from_count(n as u64) - T::from_count(d as u64 + 1))
}

/// Tail parameters for one regular model:
/// permutation models `(1/4, 0)`, fixed-point-free conjugation-invariant
/// models `(1/8, 0)`, uniform simple graphs `((1/6)(1 - (d+1)/(n-1)), (d+1)/(n-d-2))`.
pub fn utp_params<T: Real>(model: &GraphModel) -> Result<UtpParams<T>> {
    model.validate()?;
    match *model {
        GraphModel::UniformPermutation { .. } => UtpParams::new(T::lit(0.25), T::zero()),
        GraphModel::FpfInvolution { .. } | GraphModel::LongCycle { .. } => UtpParams::new(T::lit(0.125), T::zero()),
        GraphModel::UniformSimple { n, d } => {
            if n <= d + 2 {
                return Err(Error::Domain { value: (n as f64) - (d as f64) - 2.0, domain: "n - d - 2 > 0" });
            }
            let c0 = p_upper::<T>(n, d) / T::lit(6.0);
            let gamma0 = T::from_count(d as u64 + 1) / T::from_count((n - d - 2) as u64);
            UtpParams::new(c0, gamma0)
        }
        GraphModel::ErdosRenyi { .. } => Err(invalid("no tail parameters are defined for G(n, p)")),
    }
}

fn check_stats<T: Real>(stats: &LinearFormStats<T>) -> Result<()> {
    if !(stats.a > T::zero()) || !(stats.sigma_tilde_sq > T::zero()) {
        return Err(invalid("tail bounds need a > 0 and sigma_tilde_sq > 0"));
    }
    Ok(())
}

/// `exp(-c0 (σ̃²/a²) h(at/σ̃²))`, bounding both `P[f ≥ (1+γ0)μ + t]` and
/// `P[f ≤ (1-γ0)μ - t]`.
pub fn utp_bound<T: Real>(params: &UtpParams<T>, stats: &LinearFormStats<T>, t: T) -> Result<T> {
    check_stats(stats)?;
    if !(t >= T::zero()) {
        return Err(Error::Domain { value: t.as_f64(), domain: "t >= 0" });
    }
    let (a, s2) = (stats.a, stats.sigma_tilde_sq);
    Ok((-params.c0 * s2 / (a * a) * bennett_h(a * t / s2)?).exp())
}

/// The Bernstein-type relaxation `2 exp(-c0 t²/(2(σ̃² + at/3)))` of the
/// two-sided bound.
pub fn utp_bound_bernstein<T: Real>(params: &UtpParams<T>, stats: &LinearFormStats<T>, t: T) -> Result<T> {
    check_stats(stats)?;
    if !(t >= T::zero()) {
        return Err(Error::Domain { value: t.as_f64(), domain: "t >= 0" });
    }
    let (a, s2) = (stats.a, stats.sigma_tilde_sq);
    Ok(T::lit(2.0) * (-params.c0 * t * t / (T::lit(2.0) * (s2 + a * t / T::lit(3.0)))).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyTailParams<T> {
    pub p_upper: T,
    pub p_lower: T,
    pub mu: T,
}

impl<T: Real> DiscrepancyTailParams<T> {
    pub fn new(n: usize, d: usize, mu: T) -> Result<Self> {
        if n < 5 || d + 1 >= n {
            return Err(invalid(format!("need n >= 5 and d <= n-2, got n={n}, d={d}")));
        }
        let p_lower = p_lower::<T>(n, d);
        if !(p_lower > T::zero()) {
            return Err(Error::Domain { value: p_lower.as_f64(), domain: "p' = 1 - (d+1)/(n-d-1) > 0" });
        }
        Ok(Self { p_upper: p_upper(n, d), p_lower, mu })
    }

    pub fn upper_center(&self) -> T {
        self.mu / self.p_upper
    }

    pub fn lower_center(&self) -> T {
        self.p_lower * self.mu
    }
}

/// Bounds for the uniform model and `Q` with entries in `[0, a]`:
/// `P[f - μ/p ≥ t] ≤ exp(-(σ̃²/(6pa²)) h(pat/σ̃²))` and
/// `P[f - p'μ ≤ -t] ≤ exp(-(σ̃²/(6a²)) h(at/σ̃²))`.
pub fn thm51_bounds<T: Real>(n: usize, d: usize, stats: &LinearFormStats<T>, t: T) -> Result<(T, T)> {
    let params = DiscrepancyTailParams::new(n, d, stats.mu)?;
    if t == T::zero() {
        return Ok((T::one(), T::one()));
    }
    check_stats(stats)?;
    if !(t > T::zero()) {
        return Err(Error::Domain { value: t.as_f64(), domain: "t >= 0" });
    }
    let (a, s2, p) = (stats.a, stats.sigma_tilde_sq, params.p_upper);
    let six = T::lit(6.0);
    let upper = (-(s2 / (six * p * a * a)) * bennett_h(p * a * t / s2)?).exp();
    let lower = (-(s2 / (six * a * a)) * bennett_h(a * t / s2)?).exp();
    Ok((upper, lower))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeDiscrepancyBounds<T> {
    pub params: DiscrepancyTailParams<T>,
    /// Bounds on `P[e ≥ tμ/p]` (`t ≥ 1`): sharp and relaxed.
    pub upper: Option<(T, T)>,
    /// Bounds on `P[e ≤ tp'μ]` (`0 < t ≤ 1`): sharp and relaxed.
    pub lower: Option<(T, T)>,
}

/// `μ = (|S||T| - |S∩T|) d/(n-1)` for the uniform model.
pub fn edge_count_mean<T: Real>(n: usize, d: usize, s: &VertexSet, t: &VertexSet) -> T {
    let pairs = (s.len() * t.len() - s.intersection_len(t)) as u64;
    T::from_count(pairs) * T::from_count(d as u64) / T::from_count(n as u64 - 1)
}

/// Edge-count tails for the uniform model. The upper side is present for
/// `t ≥ 1`, the lower side for `0 < t ≤ 1`.
pub fn edge_discrepancy_bounds<T: Real>(
    n: usize,
    d: usize,
    s: &VertexSet,
    tset: &VertexSet,
    t: T,
) -> Result<EdgeDiscrepancyBounds<T>> {
    if s.n() != n || tset.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: s.n().max(tset.n()) });
    }
    if !(t > T::zero()) {
        return Err(Error::Domain { value: t.as_f64(), domain: "t > 0" });
    }
    let mu = edge_count_mean::<T>(n, d, s, tset);
    let params = DiscrepancyTailParams::new(n, d, mu)?;
    let two = T::lit(2.0);
    let h = bennett_h(t - T::one())?;
    let one_minus = T::one() - t;
    let upper = (t >= T::one()).then(|| {
        let p = params.p_upper;
        let tm1 = t - T::one();
        ((-(mu / (two * p)) * h).exp(), (-(T::lit(3.0) * mu * tm1 * tm1) / (T::lit(4.0) * p * (two + t))).exp())
    });
    let lower = (t <= T::one()).then(|| {
        let pm = params.p_lower * mu;
        ((-(pm / two) * h).exp(), (-(pm * one_minus * one_minus) / T::lit(4.0)).exp())
    });
    Ok(EdgeDiscrepancyBounds { params, upper, lower })
}

/// `τ∘π` with `τ` swapping `π(u)` and `v`; maps `u` to `v`.
pub fn coupled_perm_uniform(pi: &Permutation, u: usize, v: usize) -> Permutation {
    let pu = pi.apply(u);
    if pu == v {
        return pi.clone();
    }
    Permutation::transposition(pi.n(), pu, v).compose(pi)
}

/// `τ∘π∘τ` with `τ = (u, π⁻¹(v))`; maps `u` to `v` and keeps the cycle type.
pub fn coupled_perm_conjinv(pi: &Permutation, u: usize, v: usize) -> Result<Permutation> {
    if pi.has_fixed_point() {
        return Err(Error::Precondition("permutation has a fixed point".into()));
    }
    if u == v {
        return Err(Error::Precondition("conjugation coupling needs u != v".into()));
    }
    let w = pi.inverse().apply(v);
    if w == u {
        return Ok(pi.clone());
    }
    let tau = Permutation::transposition(pi.n(), u, w);
    Ok(tau.compose(pi).compose(&tau))
}

/// Exact total variation between the pushforward of the uniform law on
/// `states` under the coupling for `(u, v)` and the uniform law on the
/// states mapping `u` to `v`.
pub fn perm_coupling_tv(states: &[Permutation], kind: PermKind, u: usize, v: usize) -> Result<BigRational> {
    let targets: Vec<&Permutation> = states.iter().filter(|p| p.apply(u) == v).collect();
    if targets.is_empty() {
        return Err(invalid("no state maps u to v"));
    }
    let mut counts = vec![0i64; targets.len()];
    for p in states {
        let out = match kind {
            PermKind::Uniform => coupled_perm_uniform(p, u, v),
            _ => coupled_perm_conjinv(p, u, v)?,
        };
        match targets.iter().position(|t| **t == out) {
            Some(i) => counts[i] += 1,
            None => return Ok(BigRational::from_integer(1.into())),
        }
    }
    let total = BigRational::from_integer((states.len() as i64).into());
    let uniform = BigRational::new(1.into(), (targets.len() as i64).into());
    let tv = counts
        .iter()
        .fold(BigRational::zero(), |acc, &c| acc + (BigRational::from_integer(c.into()) / &total - &uniform).abs());
    Ok(tv / BigRational::from_integer(2.into()))
}

/// `f_Q(A) = 2 Σ_l Σ_u Q_{u,π_l(u)}` for `A = Σ_l (P_l + P_lᵀ)` and symmetric `Q`.
pub fn desymmetrized_form(q: &DenseMatrix<f64>, perms: &[Permutation]) -> f64 {
    2.0 * perms.iter().map(|p| (0..p.n()).map(|u| q.get(u, p.apply(u))).sum::<f64>()).sum::<f64>()
}

/// One coupled draw `(f_Q(A), f_Q(A'))` for a permutation model: pick `L`
/// uniformly, `(U, V)` with probability proportional to `Q_UV·P[π(U) = V]`,
/// and replace `π_L` by its coupled version.
pub fn coupled_perm_model_pair<R: Rng + ?Sized>(
    perms: &[Permutation],
    q: &DenseMatrix<f64>,
    kind: PermKind,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let n = q.n();
    if perms.is_empty() {
        return Err(invalid("need at least one permutation"));
    }
    let weight = |u: usize, v: usize| if kind != PermKind::Uniform && u == v { 0.0 } else { q.get(u, v) };
    let total: f64 = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).map(|(u, v)| weight(u, v)).sum();
    if !(total > 0.0) {
        return Err(invalid("Q has no admissible positive entry"));
    }
    let mut r = rng.random::<f64>() * total;
    let mut pick = None;
    'outer: for u in 0..n {
        for v in 0..n {
            let w = weight(u, v);
            if w > 0.0 {
                pick = Some((u, v));
                if r < w {
                    break 'outer;
                }
                r -= w;
            }
        }
    }
    let (u, v) = pick.expect("positive total");
    let l = rng.random_range(0..perms.len());
    let mut coupled = perms.to_vec();
    coupled[l] = match kind {
        PermKind::Uniform => coupled_perm_uniform(&perms[l], u, v),
        _ => coupled_perm_conjinv(&perms[l], u, v)?,
    };
    Ok((desymmetrized_form(q, perms), desymmetrized_form(q, &coupled)))
}

/// Two-sided tail comparison for one model and one `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtpReport {
    pub model: GraphModel,
    pub params: UtpParams<f64>,
    pub stats: LinearFormStats<f64>,
    pub exact: bool,
    pub upper: TailReport,
    pub lower: TailReport,
}

impl UtpReport {
    pub fn violations(&self) -> usize {
        self.upper.violations.len() + self.lower.violations.len()
    }
}

fn utp_curve(params: UtpParams<f64>, stats: LinearFormStats<f64>) -> impl Fn(f64) -> f64 {
    move |t| {
        if t <= 0.0 || stats.a <= 0.0 || stats.sigma_tilde_sq <= 0.0 {
            // degenerate Q: f_Q is a.s. constant
            1.0
        } else {
            utp_bound(&params, &stats, t).expect("valid arguments")
        }
    }
}

/// Samples `reps` graphs from `model` (replica `i` on stream `(seed, i)`) and
/// compares both tails of `f_Q(A)` with the UTP bound.
pub fn mc_tail_report(
    model: &GraphModel,
    q: &DenseMatrix<f64>,
    grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<UtpReport> {
    if reps < 100 {
        return Err(invalid("need at least 100 replicas"));
    }
    let params = utp_params::<f64>(model)?;
    let stats = linear_form_stats(q, &model.expected_matrix())?;
    let values: Vec<f64> = (0..reps)
        .into_par_iter()
        .map(|i| linear_form(q, &model.sample(&mut RngStream::new(seed, i).rng())?))
        .collect::<Result<_>>()?;
    let bound = utp_curve(params, stats);
    let up = (1.0 + params.gamma0) * stats.mu;
    let lo = (1.0 - params.gamma0) * stats.mu;
    Ok(UtpReport {
        model: *model,
        params,
        stats,
        exact: false,
        upper: TailReport::from_samples("utp upper", TailSide::Upper, up, &values, grid, &bound)?,
        lower: TailReport::from_samples("utp lower", TailSide::Lower, lo, &values, grid, &bound)?,
    })
}

/// Exact law of `f_Q(A)` for the uniform model with `n ≤ 8`, by enumeration.
pub fn exact_uniform_law(n: usize, d: usize, q: &DenseMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    if n > crate::samplers::ENUMERATION_SAMPLING_MAX_N {
        return Err(Error::Infeasible(format!("exact mode needs n <= 8, got {n}")));
    }
    let bits = regular_bits(n, d)?;
    let w = 1.0 / bits.len() as f64;
    bits.iter().map(|&b| Ok((linear_form(q, &from_adjacency_bits(n, b))?, w))).collect()
}

/// [`mc_tail_report`] without sampling error, for uniform graphs with `n ≤ 8`.
pub fn exact_tail_report(n: usize, d: usize, q: &DenseMatrix<f64>, grid: &[f64]) -> Result<UtpReport> {
    let model = GraphModel::UniformSimple { n, d };
    let params = utp_params::<f64>(&model)?;
    let stats = linear_form_stats(q, &model.expected_matrix())?;
    let law = exact_uniform_law(n, d, q)?;
    let bound = utp_curve(params, stats);
    let up = (1.0 + params.gamma0) * stats.mu;
    let lo = (1.0 - params.gamma0) * stats.mu;
    Ok(UtpReport {
        model,
        params,
        stats,
        exact: true,
        upper: TailReport::from_exact("utp upper", TailSide::Upper, up, &law, grid, &bound)?,
        lower: TailReport::from_exact("utp lower", TailSide::Lower, lo, &law, grid, &bound)?,
    })
}

/// Monte Carlo check of [`thm51_bounds`] for uniform graphs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformTailReport {
    pub n: usize,
    pub d: usize,
    pub stats: LinearFormStats<f64>,
    pub params: DiscrepancyTailParams<f64>,
    pub upper: TailReport,
    pub lower: TailReport,
}

impl UniformTailReport {
    pub fn violations(&self) -> usize {
        self.upper.violations.len() + self.lower.violations.len()
    }
}

/// Compare sampled values of `f_Q(A)` (uniform model) against both
/// sharp-form bounds. `values` are the draws of `f_Q(A)`.
pub fn thm51_report(n: usize, d: usize, q: &DenseMatrix<f64>, values: &[f64], grid: &[f64]) -> Result<UniformTailReport> {
    let model = GraphModel::UniformSimple { n, d };
    let stats = linear_form_stats(q, &model.expected_matrix())?;
    let params = DiscrepancyTailParams::new(n, d, stats.mu)?;
    let curve = |side: usize| move |t: f64| thm51_bounds(n, d, &stats, t).map(|b| if side == 0 { b.0 } else { b.1 }).unwrap_or(1.0);
    Ok(UniformTailReport {
        n,
        d,
        stats,
        params,
        upper: TailReport::from_samples("upper around mu/p", TailSide::Upper, params.upper_center(), values, grid, curve(0))?,
        lower: TailReport::from_samples("lower around p'mu", TailSide::Lower, params.lower_center(), values, grid, curve(1))?,
    })
}

/// Edge-count tails for uniform graphs against the sharp bounds of
/// [`edge_discrepancy_bounds`]. `upper_t` are multipliers `t ≥ 1` of `μ/p`,
/// `lower_t` multipliers `0 < t ≤ 1` of `p'μ`.
pub fn edge_discrepancy_report(
    n: usize,
    d: usize,
    s: &VertexSet,
    tset: &VertexSet,
    counts: &[f64],
    upper_t: &[f64],
    lower_t: &[f64],
) -> Result<(TailReport, TailReport)> {
    let mu = edge_count_mean::<f64>(n, d, s, tset);
    let params = DiscrepancyTailParams::new(n, d, mu)?;
    let (cu, cl) = (params.upper_center(), params.lower_center());
    // thresholds as offsets from the centers
    let up_grid: Vec<f64> = upper_t.iter().map(|t| (t - 1.0) * cu).collect();
    let lo_grid: Vec<f64> = lower_t.iter().rev().map(|t| (1.0 - t) * cl).collect();
    let up = TailReport::from_samples("edge count upper", TailSide::Upper, cu, counts, &up_grid, |x| {
        edge_discrepancy_bounds(n, d, s, tset, 1.0 + x / cu).unwrap().upper.unwrap().0
    })?;
    let lo = TailReport::from_samples("edge count lower", TailSide::Lower, cl, counts, &lo_grid, |x| {
        let t = (1.0 - x / cl).max(f64::MIN_POSITIVE);
        edge_discrepancy_bounds(n, d, s, tset, t).unwrap().lower.unwrap().0
    })?;
    Ok((up, lo))
}

/// `½(1_S 1_Tᵀ + 1_T 1_Sᵀ)` with `S`, `T` the first and second `k` vertices.
pub fn disjoint_set_pair(n: usize, k: usize) -> Result<(VertexSet, VertexSet, DenseMatrix<f64>)> {
    if 2 * k > n {
        return Err(invalid("need 2k <= n"));
    }
    let s = VertexSet::new(n, 0..k)?;
    let t = VertexSet::new(n, k..2 * k)?;
    let q = set_pair_matrix(&s, &t)?;
    Ok((s, t, q))
}

/// Coefficient matrices used to exercise the tail bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QClass {
    /// Symmetric, zero diagonal, off-diagonal entries uniform on `[0, 1]`.
    Random,
    /// `½(1_S 1_Tᵀ + 1_T 1_Sᵀ)` for disjoint `S`, `T` of size `⌊n/4⌋`.
    SetPair,
    /// `L⁺(x)` for a uniform random unit `x ⊥ 1`.
    Light,
}

impl QClass {
    pub const ALL: [QClass; 3] = [QClass::Random, QClass::SetPair, QClass::Light];

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "random" => Ok(Self::Random),
            "settpair" | "setpair" => Ok(Self::SetPair),
            "light" => Ok(Self::Light),
            other => Err(Error::Unknown(format!("Q class `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::SetPair => "settpair",
            Self::Light => "light",
        }
    }

    /// Draws one matrix of the class; `d` sets the light/heavy threshold.
    pub fn matrix<R: Rng + ?Sized>(&self, n: usize, d: usize, rng: &mut R) -> Result<DenseMatrix<f64>> {
        match self {
            Self::Random => {
                let mut q = DenseMatrix::zeros(n);
                for u in 0..n {
                    for v in u + 1..n {
                        let x = rng.random::<f64>();
                        q.set(u, v, x);
                        q.set(v, u, x);
                    }
                }
                Ok(q)
            }
            Self::SetPair => Ok(disjoint_set_pair(n, n / 4)?.2),
            Self::Light => {
                let x = crate::ks::random_sphere0_point(n, rng);
                Ok(crate::ks::light_heavy_split(&x, d)?.light_parts().0)
            }
        }
    }
}

/// Monte Carlo validation of one `Q` against the UTP bound and, for the
/// uniform model, the sharper bounds (and the edge-count bounds for set pairs).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtpValidation {
    pub q_class: QClass,
    pub utp: UtpReport,
    pub uniform: Option<UniformTailReport>,
    pub edge_counts: Option<(TailReport, TailReport)>,
}

impl UtpValidation {
    pub fn violations(&self) -> usize {
        self.utp.violations()
            + self.uniform.as_ref().map_or(0, |u| u.violations())
            + self.edge_counts.as_ref().map_or(0, |(a, b)| a.violations.len() + b.violations.len())
    }
}

const VALIDATION_GRID_POINTS: usize = 25;

/// Samples `reps` graphs from `model` once (replica `i` on stream `(seed, i)`)
/// and validates every class in `classes` on the same draws. The matrix for
/// class `k` comes from stream `(seed, reps + k)`.
pub fn utp_validate(model: &GraphModel, classes: &[QClass], reps: u64, seed: u64) -> Result<Vec<UtpValidation>> {
    if reps < 100 {
        return Err(invalid("need at least 100 replicas"));
    }
    let params = utp_params::<f64>(model)?;
    let (n, d) = (model.n(), model.d().expect("regular model"));
    let qs: Vec<DenseMatrix<f64>> = classes
        .iter()
        .enumerate()
        .map(|(k, c)| c.matrix(n, d, &mut RngStream::new(seed, reps + k as u64).rng()))
        .collect::<Result<_>>()?;
    let values: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|i| {
            let a = model.sample(&mut RngStream::new(seed, i).rng())?;
            qs.iter().map(|q| linear_form(q, &a)).collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let expected = model.expected_matrix::<f64>();

    classes
        .iter()
        .zip(&qs)
        .enumerate()
        .map(|(k, (&class, q))| {
            let vals: Vec<f64> = values.iter().map(|v| v[k]).collect();
            let stats = linear_form_stats(q, &expected)?;
            let t_max = 4.0 * stats.sigma_tilde_sq.sqrt() + 4.0 * stats.a;
            let grid = crate::report::linspace(0.0, t_max, VALIDATION_GRID_POINTS);
            let bound = utp_curve(params, stats);
            let up = (1.0 + params.gamma0) * stats.mu;
            let lo = (1.0 - params.gamma0) * stats.mu;
            let utp = UtpReport {
                model: *model,
                params,
                stats,
                exact: false,
                upper: TailReport::from_samples("utp upper", TailSide::Upper, up, &vals, &grid, &bound)?,
                lower: TailReport::from_samples("utp lower", TailSide::Lower, lo, &vals, &grid, &bound)?,
            };
            let (uniform, edge_counts) = match *model {
                GraphModel::UniformSimple { .. } => {
                    let u = thm51_report(n, d, q, &vals, &grid)?;
                    let e = if class == QClass::SetPair {
                        let (s, t, _) = disjoint_set_pair(n, n / 4)?;
                        let upper_t = crate::report::linspace(1.0, 3.0, VALIDATION_GRID_POINTS);
                        let lower_t = crate::report::linspace(0.05, 1.0, VALIDATION_GRID_POINTS);
                        Some(edge_discrepancy_report(n, d, &s, &t, &vals, &upper_t, &lower_t)?)
                    } else {
                        None
                    };
                    (Some(u), e)
                }
                _ => (None, None),
            };
            Ok(UtpValidation { q_class: class, utp, uniform, edge_counts })
        })
        .collect()
}
