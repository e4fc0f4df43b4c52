//! Random graph models and exhaustive enumeration of small regular graphs.
//!
//! The uniform simple sampler picks a strategy by size:
//!
//! * `n <= 8`: exact, by drawing an index into the cached enumeration;
//! * `min(d, n-1-d) <= 5`: exact, configuration-model pairing with rejection
//!   of loops and multiple edges (on the complement when `n-1-d < d`);
//! * otherwise: a simple-switching Markov chain started from a circulant
//!   graph. This path is only approximately uniform; the burn-in is a knob.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{AdjacencyMatrix, DenseMatrix};
use crate::perm::Permutation;
use crate::scalar::Real;

/// Largest `n` accepted by [`enumerate_regular`].
pub const ENUMERATION_MAX_N: usize = 10;
/// Largest `n` sampled by exact enumeration.
pub const ENUMERATION_SAMPLING_MAX_N: usize = 8;
/// Pairing is used while `min(d, n-1-d)` is at most this.
pub const PAIRING_MAX_D: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PermKind {
    Uniform,
    FpfInvolution,
    LongCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GraphModel {
    UniformSimple { n: usize, d: usize },
    UniformPermutation { n: usize, d: usize },
    FpfInvolution { n: usize, d: usize },
    LongCycle { n: usize, d: usize },
    ErdosRenyi { n: usize, p: f64 },
}

impl GraphModel {
    /// Build from the CLI model names.
    pub fn from_name(name: &str, n: usize, d: usize, p: Option<f64>) -> Result<Self> {
        let m = match name {
            "uniform" => Self::UniformSimple { n, d },
            "perm-uniform" => Self::UniformPermutation { n, d },
            "perm-involution" => Self::FpfInvolution { n, d },
            "perm-longcycle" => Self::LongCycle { n, d },
            "er" => Self::ErdosRenyi { n, p: p.ok_or_else(|| invalid("er model needs p"))? },
            other => return Err(invalid(format!("unknown model `{other}`"))),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::UniformSimple { .. } => "uniform",
            Self::UniformPermutation { .. } => "perm-uniform",
            Self::FpfInvolution { .. } => "perm-involution",
            Self::LongCycle { .. } => "perm-longcycle",
            Self::ErdosRenyi { .. } => "er",
        }
    }

    pub fn n(&self) -> usize {
        match *self {
            Self::UniformSimple { n, .. }
            | Self::UniformPermutation { n, .. }
            | Self::FpfInvolution { n, .. }
            | Self::LongCycle { n, .. }
            | Self::ErdosRenyi { n, .. } => n,
        }
    }

    /// Degree for the regular models.
    pub fn d(&self) -> Option<usize> {
        match *self {
            Self::UniformSimple { d, .. }
            | Self::UniformPermutation { d, .. }
            | Self::FpfInvolution { d, .. }
            | Self::LongCycle { d, .. } => Some(d),
            Self::ErdosRenyi { .. } => None,
        }
    }

    pub fn perm_kind(&self) -> Option<PermKind> {
        match self {
            Self::UniformPermutation { .. } => Some(PermKind::Uniform),
            Self::FpfInvolution { .. } => Some(PermKind::FpfInvolution),
            Self::LongCycle { .. } => Some(PermKind::LongCycle),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::UniformSimple { n, d } => check_uniform(n, d),
            Self::UniformPermutation { n, d } => check_perm(n, d, PermKind::Uniform),
            Self::FpfInvolution { n, d } => check_perm(n, d, PermKind::FpfInvolution),
            Self::LongCycle { n, d } => check_perm(n, d, PermKind::LongCycle),
            Self::ErdosRenyi { p, .. } => check_probability(p),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<AdjacencyMatrix> {
        self.sample_with(&SamplerOptions::default(), rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, opts: &SamplerOptions, rng: &mut R) -> Result<AdjacencyMatrix> {
        match *self {
            Self::UniformSimple { n, d } => Ok(sample_uniform_simple_with(n, d, opts, rng)?.0),
            Self::ErdosRenyi { n, p } => sample_er(n, p, rng),
            _ => {
                let kind = self.perm_kind().expect("permutation model");
                sample_permutation_model(self.n(), self.d().unwrap(), kind, rng)
            }
        }
    }

    /// `E M` for the model.
    pub fn expected_matrix<T: Real>(&self) -> DenseMatrix<T> {
        let n = self.n();
        let off = match *self {
            Self::UniformSimple { d, .. } | Self::FpfInvolution { d, .. } | Self::LongCycle { d, .. } => {
                T::from_count(d as u64) / T::from_count(n as u64 - 1)
            }
            Self::UniformPermutation { d, .. } => {
                let x = T::from_count(d as u64) / T::from_count(n as u64);
                return DenseMatrix::filled(n, x);
            }
            Self::ErdosRenyi { p, .. } => T::lit(p),
        };
        DenseMatrix::from_fn(n, |u, v| if u == v { T::zero() } else { off })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerOptions {
    /// Switching-chain burn-in, in multiples of `n·d` accepted switches.
    pub burn_in_factor: u64,
    /// Pairing attempts before giving up.
    pub retry_cap: u64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self { burn_in_factor: 100, retry_cap: 1_000_000 }
    }
}

/// Which strategy produced a uniform simple sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerPath {
    Enumeration,
    Pairing,
    SwitchingChain,
}

impl SamplerPath {
    pub fn is_exact(self) -> bool {
        !matches!(self, Self::SwitchingChain)
    }

    pub fn for_params(n: usize, d: usize) -> Self {
        if n <= ENUMERATION_SAMPLING_MAX_N {
            Self::Enumeration
        } else if d.min(n - 1 - d) <= PAIRING_MAX_D {
            Self::Pairing
        } else {
            Self::SwitchingChain
        }
    }
}

fn check_uniform(n: usize, d: usize) -> Result<()> {
    if n < 5 {
        return Err(invalid(format!("regular graphs need n >= 5, got {n}")));
    }
    if d == 0 || d >= n {
        return Err(invalid(format!("need 1 <= d <= n-1, got d={d}, n={n}")));
    }
    if n * d % 2 == 1 {
        return Err(invalid(format!("n·d must be even, got n={n}, d={d}")));
    }
    Ok(())
}

fn check_perm(n: usize, d: usize, kind: PermKind) -> Result<()> {
    if d < 2 || d % 2 == 1 {
        return Err(invalid(format!("permutation models need even d >= 2, got {d}")));
    }
    match kind {
        PermKind::FpfInvolution if n % 2 == 1 || n == 0 => {
            Err(invalid(format!("fixed-point-free involutions need even n, got {n}")))
        }
        PermKind::LongCycle if n < 2 => Err(invalid("long cycles need n >= 2")),
        PermKind::Uniform if n == 0 => Err(invalid("need n >= 1")),
        _ => Ok(()),
    }
}

fn check_probability(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain { value: p, domain: "0 <= p <= 1" });
    }
    Ok(())
}

pub fn sample_uniform_simple<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<AdjacencyMatrix> {
    Ok(sample_uniform_simple_with(n, d, &SamplerOptions::default(), rng)?.0)
}

pub fn sample_uniform_simple_with<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    opts: &SamplerOptions,
    rng: &mut R,
) -> Result<(AdjacencyMatrix, SamplerPath)> {
    check_uniform(n, d)?;
    let path = SamplerPath::for_params(n, d);
    let a = match path {
        SamplerPath::Enumeration => {
            let all = regular_bits(n, d)?;
            from_adjacency_bits(n, all[rng.random_range(0..all.len())])
        }
        SamplerPath::Pairing | SamplerPath::SwitchingChain => {
            let dc = n - 1 - d;
            let (dd, flip) = if dc < d { (dc, true) } else { (d, false) };
            let g = if dd == 0 {
                AdjacencyMatrix::empty(n)
            } else if path == SamplerPath::Pairing {
                pairing(n, dd, opts.retry_cap, rng)?
            } else {
                switching_chain(n, dd, opts.burn_in_factor, rng)
            };
            if flip {
                g.complement()?
            } else {
                g
            }
        }
    };
    Ok((a, path))
}

/// Configuration model conditioned on simplicity, rejecting a pairing at the
/// first loop or repeated edge.
fn pairing<R: Rng + ?Sized>(n: usize, d: usize, retry_cap: u64, rng: &mut R) -> Result<AdjacencyMatrix> {
    let mut points: Vec<usize> = (0..n * d).map(|k| k / d).collect();
    let mut adj = vec![false; n * n];
    let mut added: Vec<usize> = Vec::with_capacity(n * d / 2);
    for _ in 0..retry_cap {
        for &k in &added {
            adj[k] = false;
        }
        added.clear();
        points.shuffle(rng);
        let ok = points.chunks_exact(2).all(|pair| {
            let (u, v) = (pair[0], pair[1]);
            if u == v || adj[u * n + v] {
                return false;
            }
            adj[u * n + v] = true;
            adj[v * n + u] = true;
            added.push(u * n + v);
            added.push(v * n + u);
            true
        });
        if ok {
            let entries = adj.iter().map(|&b| u32::from(b)).collect();
            return AdjacencyMatrix::from_entries(n, entries, false);
        }
    }
    Err(Error::RetryCapExceeded(retry_cap))
}

/// Circulant `d`-regular graph: `i ~ i±1, …, i±⌊d/2⌋`, plus `i ~ i+n/2` for odd `d`.
pub fn circulant(n: usize, d: usize) -> Result<AdjacencyMatrix> {
    check_uniform(n, d)?;
    let mut edges = Vec::new();
    for i in 0..n {
        for k in 1..=d / 2 {
            edges.push((i, (i + k) % n, 1));
        }
        if d % 2 == 1 && i < n / 2 {
            edges.push((i, i + n / 2, 1));
        }
    }
    AdjacencyMatrix::from_edges(n, &edges, false)
}

/// Edge-swap chain: pick two edges `ab`, `ce` and an orientation, replace them
/// by `ac`, `be` when that keeps the graph simple.
fn switching_chain<R: Rng + ?Sized>(n: usize, d: usize, burn_in_factor: u64, rng: &mut R) -> AdjacencyMatrix {
    let start = circulant(n, d).expect("valid circulant parameters");
    let mut adj: Vec<bool> = start.entries().iter().map(|&x| x == 1).collect();
    let mut edges: Vec<(usize, usize)> = start.edges().into_iter().map(|(u, v, _)| (u, v)).collect();
    let target = burn_in_factor * (n * d) as u64;
    let m = edges.len();
    let mut accepted = 0u64;
    while accepted < target {
        let i = rng.random_range(0..m);
        let j = rng.random_range(0..m);
        if i == j {
            continue;
        }
        let (a, b) = edges[i];
        let (mut c, mut e) = edges[j];
        if rng.random::<bool>() {
            std::mem::swap(&mut c, &mut e);
        }
        if a == c || a == e || b == c || b == e || adj[a * n + c] || adj[b * n + e] {
            continue;
        }
        for (x, y, val) in [(a, b, false), (c, e, false), (a, c, true), (b, e, true)] {
            adj[x * n + y] = val;
            adj[y * n + x] = val;
        }
        edges[i] = (a, c);
        edges[j] = (b, e);
        accepted += 1;
    }
    let entries = adj.iter().map(|&b| u32::from(b)).collect();
    AdjacencyMatrix::from_entries(n, entries, false).expect("chain keeps the graph simple")
}

pub fn sample_uniform_permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Permutation {
    let mut images: Vec<usize> = (0..n).collect();
    images.shuffle(rng);
    Permutation::from_images(images).expect("shuffle is a permutation")
}

pub fn sample_fpf_involution<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n % 2 == 1 || n == 0 {
        return Err(invalid(format!("fixed-point-free involutions need even n >= 2, got {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut images = vec![0; n];
    for pair in order.chunks_exact(2) {
        images[pair[0]] = pair[1];
        images[pair[1]] = pair[0];
    }
    Permutation::from_images(images)
}

pub fn sample_long_cycle<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Permutation> {
    if n < 2 {
        return Err(invalid("long cycles need n >= 2"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut images = vec![0; n];
    for i in 0..n {
        images[order[i]] = order[(i + 1) % n];
    }
    Permutation::from_images(images)
}

pub fn sample_perm<R: Rng + ?Sized>(n: usize, kind: PermKind, rng: &mut R) -> Result<Permutation> {
    match kind {
        PermKind::Uniform => Ok(sample_uniform_permutation(n, rng)),
        PermKind::FpfInvolution => sample_fpf_involution(n, rng),
        PermKind::LongCycle => sample_long_cycle(n, rng),
    }
}

/// `A = Σ_l (P_l + P_lᵀ)`; a fixed point contributes 2 on the diagonal.
pub fn permutation_graph(n: usize, perms: &[Permutation]) -> Result<AdjacencyMatrix> {
    let mut entries = vec![0u32; n * n];
    for p in perms {
        if p.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.n() });
        }
        for u in 0..n {
            let v = p.apply(u);
            entries[u * n + v] += 1;
            entries[v * n + u] += 1;
        }
    }
    AdjacencyMatrix::from_entries(n, entries, true)
}

/// `d/2` i.i.d. permutations and the resulting multigraph.
pub fn sample_permutation_model_with_perms<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    kind: PermKind,
    rng: &mut R,
) -> Result<(AdjacencyMatrix, Vec<Permutation>)> {
    check_perm(n, d, kind)?;
    let perms = (0..d / 2).map(|_| sample_perm(n, kind, rng)).collect::<Result<Vec<_>>>()?;
    Ok((permutation_graph(n, &perms)?, perms))
}

pub fn sample_permutation_model<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    kind: PermKind,
    rng: &mut R,
) -> Result<AdjacencyMatrix> {
    Ok(sample_permutation_model_with_perms(n, d, kind, rng)?.0)
}

/// Erdős–Rényi `G(n, p)` by geometric skipping over the `C(n,2)` pairs.
pub fn sample_er<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<AdjacencyMatrix> {
    check_probability(p)?;
    if p == 1.0 {
        return Ok(AdjacencyMatrix::complete(n));
    }
    let mut edges = Vec::new();
    if p > 0.0 {
        let log_q = (1.0 - p).ln();
        let (mut u, mut v) = (0usize, 0usize);
        loop {
            let r: f64 = rng.random();
            let skip = ((1.0 - r).ln() / log_q).floor() as usize;
            v += skip + 1;
            while u < n && v >= n {
                v = v - n + u + 2;
                u += 1;
            }
            if u + 1 >= n {
                break;
            }
            edges.push((u, v, 1));
        }
    }
    AdjacencyMatrix::from_edges(n, &edges, false)
}

/// Number of upper-triangle pairs.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Bit of the pair `{u, v}` in [`adjacency_bits`] order.
pub fn pair_index_bit(n: usize, u: usize, v: usize) -> u64 {
    let (a, b) = (u.min(v), u.max(v));
    // pairs (0,·), …, (a-1,·) come first
    let k = a * n - a * (a + 1) / 2 + (b - a - 1);
    1 << (pair_count(n) - 1 - k)
}

/// Upper-triangle bitstring of a simple graph, pair `(0,1)` most significant,
/// then `(0,2)`, …, `(n-2,n-1)`. Requires `n <= 11`.
pub fn adjacency_bits(a: &AdjacencyMatrix) -> u64 {
    let n = a.n();
    let m = pair_count(n);
    let mut bits = 0u64;
    let mut k = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            if a.get(u, v) > 0 {
                bits |= 1 << (m - 1 - k);
            }
            k += 1;
        }
    }
    bits
}

pub fn from_adjacency_bits(n: usize, bits: u64) -> AdjacencyMatrix {
    let m = pair_count(n);
    let mut edges = Vec::new();
    let mut k = 0;
    for u in 0..n {
        for v in (u + 1)..n {
            if bits >> (m - 1 - k) & 1 == 1 {
                edges.push((u, v, 1));
            }
            k += 1;
        }
    }
    AdjacencyMatrix::from_edges(n, &edges, false).expect("bitstring describes a simple graph")
}

/// Bitstrings of all labeled simple `d`-regular graphs on `n` vertices in
/// increasing order. Results are cached per `(n, d)`.
pub fn regular_bits(n: usize, d: usize) -> Result<Arc<Vec<u64>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Vec<u64>>>>> = OnceLock::new();
    if n > ENUMERATION_MAX_N {
        return Err(Error::Infeasible(format!("enumeration limited to n <= {ENUMERATION_MAX_N}, got {n}")));
    }
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().unwrap().get(&(n, d)) {
        return Ok(hit.clone());
    }
    let mut out = Vec::new();
    if n == 0 || (d < n && n * d % 2 == 0) {
        let mut deg = vec![0usize; n];
        enumerate_rec(n, d, 0, 1, 0, pair_count(n), &mut deg, 0, &mut out);
    }
    let out = Arc::new(out);
    cache.lock().unwrap().insert((n, d), out.clone());
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn enumerate_rec(
    n: usize,
    d: usize,
    i: usize,
    j: usize,
    k: usize,
    m: usize,
    deg: &mut [usize],
    bits: u64,
    out: &mut Vec<u64>,
) {
    if i + 1 >= n {
        if n == 0 || deg[n - 1] == d {
            out.push(bits);
        }
        return;
    }
    if j == n {
        if deg[i] == d {
            enumerate_rec(n, d, i + 1, i + 2, k, m, deg, bits, out);
        }
        return;
    }
    let need = d - deg[i];
    if need > n - j {
        return;
    }
    if need < n - j {
        enumerate_rec(n, d, i, j + 1, k + 1, m, deg, bits, out);
    }
    if need > 0 && deg[j] < d {
        deg[i] += 1;
        deg[j] += 1;
        enumerate_rec(n, d, i, j + 1, k + 1, m, deg, bits | 1 << (m - 1 - k), out);
        deg[i] -= 1;
        deg[j] -= 1;
    }
}

/// Every labeled simple `d`-regular graph on `n <= 10` vertices, ordered by
/// adjacency bitstring.
pub fn enumerate_regular(n: usize, d: usize) -> Result<Vec<AdjacencyMatrix>> {
    Ok(regular_bits(n, d)?.iter().map(|&b| from_adjacency_bits(n, b)).collect())
}
