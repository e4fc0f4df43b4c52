//! Kahn–Szemerédi machinery: the light/heavy split of `xᵀAx`, the
//! discrepancy property and its checkers, the deterministic heavy-couple
//! bound, the light-couple tail, ε-nets of the zero-sum sphere and the
//! explicit constants.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{AdjacencyMatrix, DenseMatrix, VertexSet};
use crate::rng::RngStream;
use crate::scalar::Real;

/// Largest `n` accepted by the exhaustive discrepancy check.
pub const DP_EXACT_MAX_N: usize = 16;
/// Random pairs drawn by the sampled discrepancy check.
pub const DP_SAMPLED_PAIRS: usize = 100_000;
/// Largest ambient dimension for the mesh-based ε-net.
pub const EPS_NET_MAX_DIM: usize = 4;
pub const EPS_NET_MESH_POINTS: usize = 1_000_000;
/// Default cap on `γ0` in the constant calculator.
pub const GAMMA0_CAP: f64 = 10.0;

const UNIT_TOL: f64 = 1e-9;

/// `xxᵀ = L + H` with `L` holding the light couples `|x_u x_v| ≤ √d/n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LightHeavySplit<T> {
    pub light: DenseMatrix<T>,
    pub heavy: DenseMatrix<T>,
    pub threshold: T,
}

impl<T: Real> LightHeavySplit<T> {
    /// `(L⁺, L⁻)` with `L = L⁺ - L⁻`, both entrywise nonnegative.
    pub fn light_parts(&self) -> (DenseMatrix<T>, DenseMatrix<T>) {
        (
            self.light.map(|x| x.max(T::zero())),
            self.light.map(|x| (-x).max(T::zero())),
        )
    }
}

fn check_unit<T: Real>(x: &[T]) -> Result<()> {
    let norm = x.iter().map(|&v| v * v).sum::<T>().sqrt();
    if !((norm - T::one()).abs().as_f64() <= UNIT_TOL) {
        return Err(Error::Domain { value: norm.as_f64(), domain: "|x| = 1" });
    }
    Ok(())
}

#[inline]
fn heavy_threshold<T: Real>(n: usize, d: usize) -> T {
    T::from_count(d as u64).sqrt() / T::from_count(n as u64)
}

pub fn light_heavy_split<T: Real>(x: &[T], d: usize) -> Result<LightHeavySplit<T>> {
    check_unit(x)?;
    let n = x.len();
    let threshold = heavy_threshold::<T>(n, d);
    let light = DenseMatrix::from_fn(n, |u, v| {
        let p = x[u] * x[v];
        if p.abs() <= threshold {
            p
        } else {
            T::zero()
        }
    });
    let heavy = DenseMatrix::from_fn(n, |u, v| {
        let p = x[u] * x[v];
        if p.abs() <= threshold {
            T::zero()
        } else {
            p
        }
    });
    Ok(LightHeavySplit { light, heavy, threshold })
}

/// `f_{H(x)}(M)` without materializing `H(x)`.
pub fn heavy_form<T: Real>(m: &AdjacencyMatrix, x: &[T], d: usize) -> Result<T> {
    if x.len() != m.n() {
        return Err(Error::DimensionMismatch { expected: m.n(), got: x.len() });
    }
    let threshold = heavy_threshold::<T>(m.n(), d);
    let mut acc = T::zero();
    for u in 0..m.n() {
        for (v, &w) in m.row(u).iter().enumerate() {
            if w == 0 {
                continue;
            }
            let p = x[u] * x[v];
            if p.abs() > threshold {
                acc = acc + p * T::from_count(w as u64);
            }
        }
    }
    Ok(acc)
}

/// `f_{L(x)}(E A)`, the mean of the light-couple contribution.
pub fn light_mean<T: Real>(x: &[T], d: usize, expected: &DenseMatrix<T>) -> Result<T> {
    if x.len() != expected.n() {
        return Err(Error::DimensionMismatch { expected: expected.n(), got: x.len() });
    }
    let split = light_heavy_split(x, d)?;
    crate::graph::linear_form_dense(&split.light, expected)
}

/// `κ1`, `κ2` of the discrepancy property, before fixing `δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpKappas<T> {
    pub kappa1: T,
    pub kappa2: T,
}

impl<T: Real> DpKappas<T> {
    pub fn with_delta(self, delta: T) -> Result<DiscrepancyParams<T>> {
        DiscrepancyParams::new(delta, self.kappa1, self.kappa2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyParams<T> {
    pub delta: T,
    pub kappa1: T,
    pub kappa2: T,
}

impl<T: Real> DiscrepancyParams<T> {
    pub fn new(delta: T, kappa1: T, kappa2: T) -> Result<Self> {
        if !(delta > T::zero() && delta < T::one()) {
            return Err(Error::Domain { value: delta.as_f64(), domain: "0 < delta < 1" });
        }
        if !(kappa1 > T::one()) {
            return Err(Error::Domain { value: kappa1.as_f64(), domain: "kappa1 > 1" });
        }
        if !(kappa2 >= T::zero()) {
            return Err(Error::Domain { value: kappa2.as_f64(), domain: "kappa2 >= 0" });
        }
        Ok(Self { delta, kappa1, kappa2 })
    }

    /// Whether a pair with `|S| = s`, `|T| = t` and `e` edges satisfies one of
    /// the two discrepancy conditions.
    pub fn pair_holds(&self, n: usize, s: usize, t: usize, e: u64) -> bool {
        if e == 0 {
            return true;
        }
        let e = T::from_count(e);
        let ratio = e / (self.delta * T::from_count(s as u64) * T::from_count(t as u64));
        if ratio <= self.kappa1 {
            return true;
        }
        let m = T::from_count(s.max(t) as u64);
        let n = T::from_count(n as u64);
        e * ratio.ln() <= self.kappa2 * m * (T::one() + (n / m).ln())
    }
}

/// `κ1 = e²(1+γ0)²`, `κ2 = (2/c0)(1+γ0)(K+4)`.
pub fn dp_params<T: Real>(c0: T, gamma0: T, k: T) -> Result<DpKappas<T>> {
    if !(c0 > T::zero()) {
        return Err(Error::Domain { value: c0.as_f64(), domain: "c0 > 0" });
    }
    if !(gamma0 >= T::zero()) {
        return Err(Error::Domain { value: gamma0.as_f64(), domain: "gamma0 >= 0" });
    }
    let g = T::one() + gamma0;
    let two = T::lit(2.0);
    Ok(DpKappas {
        kappa1: T::E() * T::E() * g * g,
        kappa2: two / c0 * g * (k + T::lit(4.0)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DpMode {
    /// Every nonempty `(S, T)`; requires `n <= 16`.
    Exact,
    /// Random pairs plus all singleton, singleton/complement and full pairs.
    Sampled { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpWitness {
    pub s: VertexSet,
    pub t: VertexSet,
    pub edges: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpOutcome {
    pub holds: bool,
    pub witness: Option<DpWitness>,
    pub pairs_checked: u64,
}

pub fn dp_check<T: Real>(m: &AdjacencyMatrix, params: &DiscrepancyParams<T>, mode: DpMode) -> Result<DpOutcome> {
    match mode {
        DpMode::Exact => dp_check_exact(m, params),
        DpMode::Sampled { seed } => dp_check_sampled(m, params, seed),
    }
}

fn witness<T: Real>(m: &AdjacencyMatrix, params: &DiscrepancyParams<T>, s: VertexSet, t: VertexSet) -> DpWitness {
    let edges = m.edge_count(&s, &t).expect("same vertex count");
    let ratio = edges as f64 / (params.delta.as_f64() * s.len() as f64 * t.len() as f64);
    DpWitness { s, t, edges, ratio }
}

/// For each `S` the worst `T` of size `t` takes the `t` largest column sums
/// `c_v = e(S, {v})`, and both conditions are monotone in `e`, so checking
/// the top-`t` prefix sums covers every `T`. Column sums are updated along a
/// Gray code within each block of subsets.
fn dp_check_exact<T: Real>(m: &AdjacencyMatrix, params: &DiscrepancyParams<T>) -> Result<DpOutcome> {
    let n = m.n();
    if n > DP_EXACT_MAX_N {
        return Err(Error::Infeasible(format!("exact discrepancy check needs n <= {DP_EXACT_MAX_N}, got {n}")));
    }
    if n == 0 {
        return Ok(DpOutcome { holds: true, witness: None, pairs_checked: 0 });
    }
    let low_bits = n.min(10);
    let blocks = 1u64 << (n - low_bits);
    let first = (0..blocks)
        .into_par_iter()
        .filter_map(|hi| {
            let base = hi << low_bits;
            let mut cols = vec![0u64; n];
            for u in low_bits..n {
                if base >> u & 1 == 1 {
                    for (c, &w) in cols.iter_mut().zip(m.row(u)) {
                        *c += w as u64;
                    }
                }
            }
            let mut gray = 0u64;
            let mut best: Option<(u64, usize)> = None;
            let mut sorted = vec![0u64; n];
            for k in 0..1u64 << low_bits {
                if k > 0 {
                    let bit = k.trailing_zeros() as usize;
                    gray ^= 1 << bit;
                    let add = gray >> bit & 1 == 1;
                    for (c, &w) in cols.iter_mut().zip(m.row(bit)) {
                        if add {
                            *c += w as u64;
                        } else {
                            *c -= w as u64;
                        }
                    }
                }
                let mask = base | gray;
                if mask == 0 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                sorted.copy_from_slice(&cols);
                sorted.sort_unstable_by(|a, b| b.cmp(a));
                let mut e = 0u64;
                for (t, &c) in sorted.iter().enumerate() {
                    e += c;
                    if !params.pair_holds(n, s, t + 1, e) {
                        let cand = (mask, t + 1);
                        if best.map_or(true, |b| cand < b) {
                            best = Some(cand);
                        }
                        break;
                    }
                }
            }
            best
        })
        .min();
    let pairs_checked = ((1u64 << n) - 1) * n as u64;
    Ok(match first {
        None => DpOutcome { holds: true, witness: None, pairs_checked },
        Some((mask, t)) => {
            let s = VertexSet::from_mask(n, mask);
            let ind = s.indicator();
            let mut cols: Vec<(u64, usize)> = (0..n)
                .map(|v| ((0..n).filter(|&u| ind[u]).map(|u| m.get(u, v) as u64).sum(), v))
                .collect();
            cols.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let tset = VertexSet::new(n, cols[..t].iter().map(|&(_, v)| v)).expect("in range");
            DpOutcome { holds: false, witness: Some(witness(m, params, s, tset)), pairs_checked }
        }
    })
}

fn dp_check_sampled<T: Real>(m: &AdjacencyMatrix, params: &DiscrepancyParams<T>, seed: u64) -> Result<DpOutcome> {
    let n = m.n();
    if n == 0 {
        return Ok(DpOutcome { holds: true, witness: None, pairs_checked: 0 });
    }
    let mut checked = 0u64;
    let mut check = |s: VertexSet, t: VertexSet| -> Option<DpWitness> {
        checked += 1;
        let e = m.edge_count(&s, &t).expect("same vertex count");
        if params.pair_holds(n, s.len(), t.len(), e) {
            None
        } else {
            Some(witness(m, params, s, t))
        }
    };
    let full = VertexSet::full(n);
    if let Some(w) = check(full.clone(), full) {
        return Ok(DpOutcome { holds: false, witness: Some(w), pairs_checked: checked });
    }
    for u in 0..n {
        let su = VertexSet::new(n, [u]).expect("in range");
        if n > 1 {
            let rest = su.complement();
            for (s, t) in [(su.clone(), rest.clone()), (rest, su.clone())] {
                if let Some(w) = check(s, t) {
                    return Ok(DpOutcome { holds: false, witness: Some(w), pairs_checked: checked });
                }
            }
        }
        for v in 0..n {
            let sv = VertexSet::new(n, [v]).expect("in range");
            if let Some(w) = check(su.clone(), sv) {
                return Ok(DpOutcome { holds: false, witness: Some(w), pairs_checked: checked });
            }
        }
    }
    let mut rng = RngStream::new(seed, 0).rng();
    for _ in 0..DP_SAMPLED_PAIRS {
        let s = random_subset(n, &mut rng);
        let t = random_subset(n, &mut rng);
        if let Some(w) = check(s, t) {
            return Ok(DpOutcome { holds: false, witness: Some(w), pairs_checked: checked });
        }
    }
    Ok(DpOutcome { holds: true, witness: None, pairs_checked: checked })
}

fn random_subset<R: Rng + ?Sized>(n: usize, rng: &mut R) -> VertexSet {
    let k = rng.random_range(1..=n);
    VertexSet::new(n, sample_indices(rng, n, k).into_iter()).expect("in range")
}

/// `α0(C, κ1, κ2) = 16 + 32C(1+κ1) + 64κ2(1 + 2/(κ1 ln κ1))`.
pub fn heavy_alpha0<T: Real>(c: T, kappa1: T, kappa2: T) -> Result<T> {
    if !(kappa1 > T::one()) {
        return Err(Error::Domain { value: kappa1.as_f64(), domain: "kappa1 > 1" });
    }
    let two = T::lit(2.0);
    Ok(T::lit(16.0) + T::lit(32.0) * c * (T::one() + kappa1) + T::lit(64.0) * kappa2 * (T::one() + two / (kappa1 * kappa1.ln())))
}

/// Dyadic classes `S_i = {u : |x_u|√n ∈ [2^{i-1}, 2^i)}`, `i >= 1`, and
/// `α_i = 2^{2i}|S_i|/n`.
pub fn dyadic_alphas<T: Real>(x: &[T]) -> Vec<T> {
    let n = x.len();
    let sqrt_n = T::from_count(n as u64).sqrt();
    let mut counts: Vec<u64> = Vec::new();
    for &xu in x {
        let y = xu.abs() * sqrt_n;
        if y < T::one() {
            continue;
        }
        let i = y.log2().floor().to_usize().expect("finite") + 1;
        if counts.len() < i {
            counts.resize(i, 0);
        }
        counts[i - 1] += 1;
    }
    counts
        .iter()
        .enumerate()
        .map(|(k, &c)| T::lit(4f64.powi(k as i32 + 1)) * T::from_count(c) / T::from_count(n as u64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyEval<T> {
    /// `f_{H(x)}(M)`
    pub value: T,
    /// `α0 √d`
    pub bound: T,
    /// `|value| <= bound`
    pub ok: bool,
    /// `Σ α_i` over the dyadic classes of `x`; at most 4.
    pub alpha_sum: T,
}

/// A matrix for which the discrepancy property was established in this run,
/// ready to evaluate heavy-couple contributions.
#[derive(Debug, Clone)]
pub struct HeavyCheck<'a, T> {
    m: &'a AdjacencyMatrix,
    d: usize,
    alpha0: T,
    pub dp: DpOutcome,
}

impl<'a, T: Real> HeavyCheck<'a, T> {
    /// Checks row sums `<= d` and the discrepancy property (`mode`), failing
    /// with `Precondition` when either is unmet.
    pub fn new(
        m: &'a AdjacencyMatrix,
        d: usize,
        params: &DiscrepancyParams<T>,
        alpha0: T,
        mode: DpMode,
    ) -> Result<Self> {
        if let Some(u) = (0..m.n()).find(|&u| m.degree(u).map_or(true, |deg| deg > d as u64)) {
            return Err(Error::Precondition(format!("row {} has sum above d = {d}", u + 1)));
        }
        let dp = dp_check(m, params, mode)?;
        if !dp.holds {
            return Err(Error::Precondition("discrepancy property fails".into()));
        }
        Ok(Self { m, d, alpha0, dp })
    }

    pub fn check(&self, x: &[T]) -> Result<HeavyEval<T>> {
        check_unit(x)?;
        let value = heavy_form(self.m, x, self.d)?;
        let bound = self.alpha0 * T::from_count(self.d as u64).sqrt();
        Ok(HeavyEval {
            value,
            bound,
            ok: value.abs() <= bound,
            alpha_sum: dyadic_alphas(x).into_iter().sum(),
        })
    }
}

/// One-shot heavy-couple check; recomputes the discrepancy property exactly
/// for `n <= 16` and by sampling otherwise.
pub fn verify_heavy<T: Real>(
    m: &AdjacencyMatrix,
    x: &[T],
    d: usize,
    params: &DiscrepancyParams<T>,
    alpha0: T,
) -> Result<HeavyEval<T>> {
    let mode = if m.n() <= DP_EXACT_MAX_N { DpMode::Exact } else { DpMode::Sampled { seed: 0 } };
    HeavyCheck::new(m, d, params, alpha0, mode)?.check(x)
}

/// Summary of [`heavy_audit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeavyAudit {
    pub n: usize,
    pub d: usize,
    pub params: DiscrepancyParams<f64>,
    pub alpha0: f64,
    pub graphs: u64,
    /// Graphs on which the discrepancy property held and `x` was tested.
    pub dp_holds: u64,
    pub evaluations: u64,
    pub violations: u64,
    /// Largest `|f_{H(x)}(A)| / (α0 √d)` seen.
    pub max_ratio: f64,
    pub max_alpha_sum: f64,
}

/// Samples `graphs` uniform `d`-regular graphs (graph `i` on stream
/// `(seed, i)`), and on each one where the discrepancy property holds with
/// `δ = 2d/n`, `C = 2` and `(κ1, κ2)` from the uniform tail parameters at
/// `K = 1` (`γ0` capped at [`GAMMA0_CAP`]), evaluates the heavy-couple bound
/// on `xs_per_graph` random unit vectors `x ⊥ 1`.
pub fn heavy_audit(n: usize, d: usize, graphs: u64, xs_per_graph: usize, seed: u64) -> Result<HeavyAudit> {
    let model = crate::samplers::GraphModel::UniformSimple { n, d };
    let utp = crate::utp::utp_params::<f64>(&model)?;
    let c = 2.0;
    let kappas = dp_params(utp.c0, utp.gamma0.min(GAMMA0_CAP), 1.0)?;
    let params = kappas.with_delta(c * d as f64 / n as f64)?;
    let alpha0 = heavy_alpha0(c, kappas.kappa1, kappas.kappa2)?;
    let per_graph: Vec<Option<(u64, f64, f64)>> = (0..graphs)
        .into_par_iter()
        .map(|i| {
            let stream = RngStream::new(seed, i);
            let a = model.sample(&mut stream.rng())?;
            let mode = if n <= DP_EXACT_MAX_N { DpMode::Exact } else { DpMode::Sampled { seed: stream.derived(1).seed } };
            let check = match HeavyCheck::new(&a, d, &params, alpha0, mode) {
                Ok(c) => c,
                Err(Error::Precondition(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            let mut rng = stream.derived(2).rng();
            let (mut bad, mut ratio, mut asum) = (0u64, 0f64, 0f64);
            for _ in 0..xs_per_graph {
                let x = random_sphere0_point(n, &mut rng);
                let ev = check.check(&x)?;
                bad += u64::from(!ev.ok);
                ratio = ratio.max(ev.value.abs() / ev.bound);
                asum = asum.max(ev.alpha_sum);
            }
            Ok(Some((bad, ratio, asum)))
        })
        .collect::<Result<_>>()?;
    let tested: Vec<(u64, f64, f64)> = per_graph.into_iter().flatten().collect();
    Ok(HeavyAudit {
        n,
        d,
        params,
        alpha0,
        graphs,
        dp_holds: tested.len() as u64,
        evaluations: tested.len() as u64 * xs_per_graph as u64,
        violations: tested.iter().map(|t| t.0).sum(),
        max_ratio: tested.iter().map(|t| t.1).fold(0.0, f64::max),
        max_alpha_sum: tested.iter().map(|t| t.2).fold(0.0, f64::max),
    })
}

/// `4 exp(-c0 β² n / (32(a1 + β/12)))`, valid for `β >= 4 a1 a3`.
pub fn light_tail_bound<T: Real>(beta: T, c0: T, a1: T, a3: T, n: usize) -> Result<T> {
    let min_beta = T::lit(4.0) * a1 * a3;
    if !(beta >= min_beta) {
        return Err(Error::Domain { value: beta.as_f64(), domain: "beta >= 4 a1 a3" });
    }
    if !(c0 > T::zero()) || !(a1 > T::zero()) {
        return Err(invalid("light tail needs c0 > 0 and a1 > 0"));
    }
    let exponent = c0 * beta * beta * T::from_count(n as u64) / (T::lit(32.0) * (a1 + beta / T::lit(12.0)));
    Ok(T::lit(4.0) * (-exponent).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsNet {
    pub dim: usize,
    pub eps: f64,
    pub points: Vec<Vec<f64>>,
    pub mesh_points: usize,
    /// Upper bound on the distance from any point of the zero-sum sphere to
    /// the mesh; the net covers the sphere within `eps + mesh_radius`.
    pub mesh_radius: f64,
}

impl EpsNet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `(1 + 2/ε)^dim`
    pub fn cardinality_cap(&self) -> f64 {
        (1.0 + 2.0 / self.eps).powi(self.dim as i32)
    }

    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            for q in &self.points[i + 1..] {
                best = best.min(dist(p, q));
            }
        }
        best
    }

    pub fn distance_to(&self, x: &[f64]) -> f64 {
        self.points.iter().map(|p| dist(p, x)).fold(f64::INFINITY, f64::min)
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Orthonormal basis of `1⊥ ⊂ R^dim`: `(1, …, 1, -k, 0, …)/√(k(k+1))`.
pub fn helmert_basis(dim: usize) -> Vec<Vec<f64>> {
    (1..dim)
        .map(|k| {
            let scale = ((k * (k + 1)) as f64).sqrt();
            (0..dim)
                .map(|j| match j.cmp(&k) {
                    std::cmp::Ordering::Less => 1.0 / scale,
                    std::cmp::Ordering::Equal => -(k as f64) / scale,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect()
}

/// Random point of the zero-sum unit sphere in `R^dim`.
pub fn random_sphere0_point<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut x: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        let mean = x.iter().sum::<f64>() / dim as f64;
        x.iter_mut().for_each(|v| *v -= mean);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-12 {
            x.iter_mut().for_each(|v| *v /= norm);
            return x;
        }
    }
}

/// Unit sphere in `R^k` meshed with about `points` points, and an upper
/// bound on its covering radius.
fn sphere_mesh(k: usize, points: usize) -> (Vec<Vec<f64>>, f64) {
    match k {
        1 => (vec![vec![1.0], vec![-1.0]], 0.0),
        2 => {
            let m = points.max(3);
            let mesh = (0..m)
                .map(|j| {
                    let a = std::f64::consts::TAU * j as f64 / m as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect();
            (mesh, 2.0 * (std::f64::consts::PI / (2.0 * m as f64)).sin())
        }
        _ => {
            // radial projection of a g×g grid on each face of [-1,1]^3; the
            // projection is 1-Lipschitz outside the unit ball
            let g = ((points as f64 / 6.0).sqrt().ceil() as usize).max(1);
            let h = 2.0 / g as f64;
            let mut mesh = Vec::with_capacity(6 * g * g);
            for axis in 0..3 {
                for sign in [1.0, -1.0] {
                    for i in 0..g {
                        for j in 0..g {
                            let a = -1.0 + h * (i as f64 + 0.5);
                            let b = -1.0 + h * (j as f64 + 0.5);
                            let mut p = [0.0; 3];
                            p[axis] = sign;
                            p[(axis + 1) % 3] = a;
                            p[(axis + 2) % 3] = b;
                            let norm = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                            mesh.push(p.iter().map(|v| v / norm).collect());
                        }
                    }
                }
            }
            (mesh, h / std::f64::consts::SQRT_2)
        }
    }
}

pub fn eps_net(dim: usize, eps: f64) -> Result<EpsNet> {
    eps_net_with_mesh(dim, eps, EPS_NET_MESH_POINTS)
}

/// Greedy maximal ε-separated subset (pairwise distances `> ε`) of a mesh of
/// the zero-sum unit sphere in `R^dim`.
pub fn eps_net_with_mesh(dim: usize, eps: f64, mesh_points: usize) -> Result<EpsNet> {
    if !(2..=EPS_NET_MAX_DIM).contains(&dim) {
        return Err(Error::Infeasible(format!("eps_net needs 2 <= dim <= {EPS_NET_MAX_DIM}, got {dim}")));
    }
    if !(eps > 0.0 && eps <= 2.0) {
        return Err(Error::Domain { value: eps, domain: "0 < eps <= 2" });
    }
    let basis = helmert_basis(dim);
    let (mesh, mesh_radius) = sphere_mesh(dim - 1, mesh_points);
    let embed = |c: &[f64]| -> Vec<f64> {
        (0..dim).map(|j| c.iter().zip(&basis).map(|(ci, b)| ci * b[j]).sum()).collect()
    };
    let mut points: Vec<Vec<f64>> = Vec::new();
    for c in &mesh {
        let p = embed(c);
        if points.iter().rev().all(|q| dist(q, &p) > eps) {
            points.push(p);
        }
    }
    Ok(EpsNet { dim, eps, points, mesh_points: mesh.len(), mesh_radius })
}

/// Inputs and derived constants of the spectral bound `λ(A) <= α√d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsConstants<T> {
    pub a1: T,
    pub a2: T,
    pub a3: T,
    pub c0: T,
    pub k: T,
    pub gamma0: T,
    pub kappa1: T,
    pub kappa2: T,
    pub alpha0: T,
    pub beta: T,
    pub alpha: T,
}

/// `α0` from `(C, κ1, κ2) = (a1, κ1(γ0), κ2(c0, γ0, K))` and
/// `α = 3(α0 + a1 + a2) + max(36a1, 12a1a3, 64/c0)`, with `β = α/3 - α0 - a1 - a2`.
pub fn alpha_constants<T: Real>(a1: T, a2: T, a3: T, c0: T, k: T, gamma0: T) -> Result<KsConstants<T>> {
    if !(a1 > T::zero()) || !(a2 >= T::zero()) || !(a3 >= T::zero()) || !(k > T::zero()) {
        return Err(invalid("constants need a1 > 0, a2 >= 0, a3 >= 0, K > 0"));
    }
    let kappas = dp_params(c0, gamma0, k)?;
    let alpha0 = heavy_alpha0(a1, kappas.kappa1, kappas.kappa2)?;
    let tail = (T::lit(36.0) * a1).max(T::lit(12.0) * a1 * a3).max(T::lit(64.0) / c0);
    let alpha = T::lit(3.0) * (alpha0 + a1 + a2) + tail;
    Ok(KsConstants {
        a1,
        a2,
        a3,
        c0,
        k,
        gamma0,
        kappa1: kappas.kappa1,
        kappa2: kappas.kappa2,
        alpha0,
        beta: tail / T::lit(3.0),
        alpha,
    })
}

/// `α0` written directly in `(a1, c0, γ0, K)`:
/// `16 + 32a1(1 + e²(1+γ0)²) + (128/c0)(1+γ0)(K+4)(1 + 1/(e²(1+γ0)²(1 + ln(1+γ0))))`.
pub fn alpha0_closed_form<T: Real>(a1: T, c0: T, gamma0: T, k: T) -> T {
    let g = T::one() + gamma0;
    let e2g2 = T::E() * T::E() * g * g;
    T::lit(16.0)
        + T::lit(32.0) * a1 * (T::one() + e2g2)
        + T::lit(128.0) / c0 * g * (k + T::lit(4.0)) * (T::one() + T::one() / (e2g2 * (T::one() + g.ln())))
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Rational enclosure `lo <= e <= hi` from the exponential series.
fn e_bounds() -> (BigRational, BigRational) {
    let mut sum = BigRational::zero();
    let mut term = BigRational::one();
    for k in 1..=30i64 {
        sum += &term;
        term /= BigRational::from_integer(BigInt::from(k));
    }
    // term = 1/30!; the remaining tail is below 2/30!
    let hi = &sum + &term * rat(2, 1);
    (sum, hi)
}

/// Rational lower bound on `ln x` for rational `x >= 1`.
fn ln_lower(x: &BigRational) -> BigRational {
    assert!(*x >= BigRational::one());
    let two = rat(2, 1);
    let mut y = x.clone();
    let mut k = 0i64;
    while y >= two {
        y /= &two;
        k += 1;
    }
    let atanh_series = |v: &BigRational| {
        // ln v = 2 Σ z^{2j+1}/(2j+1), z = (v-1)/(v+1); partial sums are lower bounds
        let z = (v - BigRational::one()) / (v + BigRational::one());
        let z2 = &z * &z;
        let mut pow = z.clone();
        let mut sum = BigRational::zero();
        for j in 0..60i64 {
            sum += &pow / BigRational::from_integer(BigInt::from(2 * j + 1));
            pow *= &z2;
        }
        sum * rat(2, 1)
    };
    atanh_series(&two) * BigRational::from_integer(BigInt::from(k)) + atanh_series(&y)
}

/// Rational `(lo, hi)` around `√x`, `hi - lo <= 2e-9·(1+x)`.
fn sqrt_bounds(x: &BigRational) -> (BigRational, BigRational) {
    let approx = x.to_f64().expect("finite").sqrt();
    let slack = 1e-9 * (1.0 + approx);
    let mut lo = BigRational::from_float((approx - slack).max(0.0)).expect("finite");
    let mut hi = BigRational::from_float(approx + slack).expect("finite");
    while &(&lo * &lo) > x {
        lo /= rat(2, 1);
    }
    while &(&hi * &hi) < x {
        hi *= rat(2, 1);
    }
    (lo, hi)
}

/// Exact check of the constant chain for uniform random regular graphs:
/// `a1 = 2`, `a2 = 1`, `c0 = 1/12`, `γ0 <= 10`, `a3 = 2C0^{3/2}`, applied
/// with `K + 1` in place of `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantCertificate {
    pub k: u32,
    pub c0_big: f64,
    /// Rational upper bound on `α0`, rounded up to `f64`.
    pub alpha0_upper: f64,
    /// `153214 + 76484K`
    pub alpha0_claim: f64,
    pub alpha_upper: f64,
    /// `459651 + 229452K + max(30C0^{3/2}, 768)`, rounded down.
    pub alpha_claim: f64,
    /// `459652 + 229452K + max(30C0^{3/2}, 768)`, the bound once `d <= n/2`
    /// is dropped via the complement.
    pub headline: f64,
    pub alpha0_ok: bool,
    pub alpha_ok: bool,
    pub headline_ok: bool,
}

impl ConstantCertificate {
    pub fn ok(&self) -> bool {
        self.alpha0_ok && self.alpha_ok && self.headline_ok
    }
}

fn up_f64(x: &BigRational) -> f64 {
    let f = x.to_f64().expect("finite");
    if BigRational::from_float(f).expect("finite") >= *x {
        f
    } else {
        f.next_up()
    }
}

fn down_f64(x: &BigRational) -> f64 {
    let f = x.to_f64().expect("finite");
    if BigRational::from_float(f).expect("finite") <= *x {
        f
    } else {
        f.next_down()
    }
}

pub fn certify_constants(k: u32, c0_big: f64) -> Result<ConstantCertificate> {
    if !(c0_big > 0.0 && c0_big.is_finite()) {
        return Err(Error::Domain { value: c0_big, domain: "C0 > 0" });
    }
    let one = BigRational::one();
    let a1 = rat(2, 1);
    let a2 = rat(1, 1);
    let c0 = rat(1, 12);
    let g = rat(11, 1);
    let kk = BigRational::from_integer(BigInt::from(k + 1));
    let (e_lo, e_hi) = e_bounds();
    let ln_g_lo = ln_lower(&g);
    let e2g2_hi = &e_hi * &e_hi * &g * &g;
    let e2g2_lo = &e_lo * &e_lo * &g * &g;
    let alpha0 = rat(16, 1)
        + rat(32, 1) * &a1 * (&one + &e2g2_hi)
        + rat(128, 1) / &c0 * &g * (&kk + rat(4, 1)) * (&one + &one / (&e2g2_lo * (&one + &ln_g_lo)));

    let cb = BigRational::from_float(c0_big).expect("finite");
    let (sq_lo, sq_hi) = sqrt_bounds(&cb);
    let c32_hi = &cb * &sq_hi;
    let c32_lo = &cb * &sq_lo;
    let a3_hi = rat(2, 1) * &c32_hi;
    let tail = [rat(36, 1) * &a1, rat(12, 1) * &a1 * &a3_hi, rat(64, 1) / &c0]
        .into_iter()
        .max()
        .expect("nonempty");
    let alpha = rat(3, 1) * (&alpha0 + &a1 + &a2) + tail;

    let kb = BigRational::from_integer(BigInt::from(k));
    let alpha0_claim = rat(153214, 1) + rat(76484, 1) * &kb;
    let claim_tail = std::cmp::max(rat(30, 1) * &c32_lo, rat(768, 1));
    let alpha_claim = rat(459651, 1) + rat(229452, 1) * &kb + &claim_tail;
    let headline = &alpha_claim + &one;
    Ok(ConstantCertificate {
        k,
        c0_big,
        alpha0_upper: up_f64(&alpha0),
        alpha0_claim: down_f64(&alpha0_claim),
        alpha_upper: up_f64(&alpha),
        alpha_claim: down_f64(&alpha_claim),
        headline: down_f64(&headline),
        alpha0_ok: alpha0 <= alpha0_claim,
        alpha_ok: alpha <= alpha_claim,
        headline_ok: &alpha + &one <= headline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn dp_params_examples() {
        let k = dp_params(0.25, 0.0, 1.0).unwrap();
        assert_relative_eq!(k.kappa1, std::f64::consts::E.powi(2), max_relative = 1e-15);
        assert_relative_eq!(k.kappa2, 40.0, max_relative = 1e-15);
        let k = dp_params(2.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(k.kappa2, 4.0);
        assert!(dp_params(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn heavy_alpha0_examples() {
        let e2 = std::f64::consts::E.powi(2);
        assert_relative_eq!(heavy_alpha0(1.0, e2, 0.0).unwrap(), 16.0 + 32.0 * (1.0 + e2));
        assert!((heavy_alpha0(1.0, e2, 0.0).unwrap() - 284.45).abs() < 0.01);
        assert_eq!(heavy_alpha0(0.0, 2.0, 0.0).unwrap(), 16.0);
        assert!(heavy_alpha0(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn closed_form_alpha0_agrees_with_composition() {
        for &(a1, c0, g, k) in &[(2.0, 1.0 / 12.0, 10.0, 3.0), (1.0, 0.25, 0.0, 1.0), (2.0, 0.1, 0.7, 5.0)] {
            let c = alpha_constants(a1, 1.0, 0.0, c0, k, g).unwrap();
            assert_relative_eq!(c.alpha0, alpha0_closed_form(a1, c0, g, k), max_relative = 1e-13);
            assert_relative_eq!(c.alpha, 3.0 * (c.alpha0 + c.a1 + c.a2 + c.beta), max_relative = 1e-13);
        }
    }

    #[test]
    fn rational_enclosures() {
        let (lo, hi) = e_bounds();
        assert!(lo.to_f64().unwrap() <= std::f64::consts::E && std::f64::consts::E <= hi.to_f64().unwrap());
        let l = ln_lower(&rat(11, 1)).to_f64().unwrap();
        assert!(l <= 11f64.ln() && 11f64.ln() - l < 1e-12);
        let (lo, hi) = sqrt_bounds(&rat(2, 1));
        assert!(&lo * &lo <= rat(2, 1) && &hi * &hi >= rat(2, 1));
    }

    #[test]
    fn pair_conditions() {
        let p = DiscrepancyParams::new(0.4, 1.01, 0.0).unwrap();
        assert!(!p.pair_holds(5, 2, 2, 2));
        assert!(p.pair_holds(5, 2, 2, 0));
        let p = DiscrepancyParams::new(0.8, 2.0, 0.0).unwrap();
        assert!(p.pair_holds(5, 5, 5, 20));
    }

    #[test]
    fn dyadic_alpha_sum_at_most_four() {
        let x = [0.9f64, -0.3, 0.3, -0.1];
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: Vec<f64> = x.iter().map(|v| v / norm).collect();
        assert!(dyadic_alphas(&x).iter().sum::<f64>() <= 4.0);
    }

    #[test]
    fn mesh_radius_bounds_probe_distance() {
        let (mesh, r) = sphere_mesh(3, 6000);
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..200 {
            let p = random_sphere0_point(4, &mut rng);
            let c: Vec<f64> = helmert_basis(4).iter().map(|b| b.iter().zip(&p).map(|(x, y)| x * y).sum()).collect();
            let best = mesh.iter().map(|m| dist(m, &c)).fold(f64::INFINITY, f64::min);
            assert!(best <= r + 1e-12);
        }
    }
}
