//! Double switchings of simple regular graphs and the exact coupling between
//! a uniform `d`-regular graph and one conditioned to contain a fixed edge.
//!
//! A switching `(v1, …, v6)` is valid for `A` when `v2v3`, `v4v5`, `v6v1` are
//! edges, `v1v2`, `v3v4`, `v5v6` are non-edges and `v1≠v2`, `v3≠v4`, `v5≠v6`.
//! Applying it swaps the two triples of pairs, which keeps every degree.
//!
//! The coupling graph for `(u, v)` is a weighted bipartite graph between all
//! `d`-regular graphs (left) and those containing `uv` (right). Its core
//! edges are: one unit edge per valid switching `(u, v, ·, ·, ·, ·)` from a
//! graph without `uv`, and an identity edge of weight `d³(n-d-1)` from each
//! graph with `uv` to itself. A deterministic greedy completion then makes
//! every left vertex have weight `d³(n-d-1)` and every right vertex
//! `d²(n-d-1)(n-1)`. Walking one edge from a uniform left vertex with
//! probability proportional to weight lands on a uniform right vertex.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{linear_form, AdjacencyMatrix, DenseMatrix};
use crate::samplers::{adjacency_bits, from_adjacency_bits, pair_index_bit, regular_bits};

/// Largest `n` for which coupling graphs are built.
pub const COUPLING_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Switching(pub [usize; 6]);

impl Switching {
    /// `(v1, v6, v5, v4, v3, v2)`, which undoes `self`.
    pub fn inverse(&self) -> Self {
        let [v1, v2, v3, v4, v5, v6] = self.0;
        Self([v1, v6, v5, v4, v3, v2])
    }

    pub fn added(&self) -> [(usize, usize); 3] {
        let [v1, v2, v3, v4, v5, v6] = self.0;
        [(v1, v2), (v3, v4), (v5, v6)]
    }

    pub fn removed(&self) -> [(usize, usize); 3] {
        let [v1, v2, v3, v4, v5, v6] = self.0;
        [(v2, v3), (v4, v5), (v6, v1)]
    }

    /// `f_Q(A') - f_Q(A) = 2(Q12 + Q34 + Q56 - Q23 - Q45 - Q61)` for symmetric `Q`.
    pub fn linear_form_gap(&self, q: &DenseMatrix<f64>) -> f64 {
        let plus: f64 = self.added().iter().map(|&(a, b)| q.get(a, b)).sum();
        let minus: f64 = self.removed().iter().map(|&(a, b)| q.get(a, b)).sum();
        2.0 * (plus - minus)
    }
}

pub fn is_valid_switching(a: &AdjacencyMatrix, sw: &Switching) -> bool {
    let n = a.n();
    let [v1, v2, v3, v4, v5, v6] = sw.0;
    if sw.0.iter().any(|&x| x >= n) || v1 == v2 || v3 == v4 || v5 == v6 {
        return false;
    }
    sw.removed().iter().all(|&(x, y)| a.get(x, y) == 1) && sw.added().iter().all(|&(x, y)| a.get(x, y) == 0)
}

pub fn apply_switching(a: &AdjacencyMatrix, sw: &Switching) -> Result<AdjacencyMatrix> {
    if !is_valid_switching(a, sw) {
        return Err(Error::InvalidSwitching(format!("{:?} is not valid for this graph", sw.0)));
    }
    let n = a.n();
    let mut entries = a.entries().to_vec();
    for (x, y) in sw.removed() {
        entries[x * n + y] -= 1;
        entries[y * n + x] -= 1;
    }
    for (x, y) in sw.added() {
        entries[x * n + y] += 1;
        entries[y * n + x] += 1;
    }
    AdjacencyMatrix::from_entries(n, entries, a.is_multigraph())
        .map_err(|e| Error::InvalidSwitching(format!("switching produced a non-simple graph: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchingCounts {
    /// Valid switchings `(u, v, ·, ·, ·, ·)`.
    pub s_uv: u64,
    /// Valid switchings `(u, ·, ·, ·, ·, v)`.
    pub t_uv: u64,
}

/// Inclusive count ranges for a pair of a simple `d`-regular graph, with
/// negative lower bounds clamped to zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountBounds {
    pub s_range: (i64, i64),
    pub t_range: (i64, i64),
}

impl CountBounds {
    pub fn new(n: usize, d: usize) -> Self {
        let (n, d) = (n as i64, d as i64);
        Self {
            s_range: ((d.pow(3) * (n - 2 * d - 2)).max(0), d.pow(3) * (n - d - 1)),
            t_range: ((d * d * (n - d - 1) * (n - 2 * d - 2)).max(0), d * d * (n - d - 1).pow(2)),
        }
    }

    /// Checks the count relevant to the pair: `s_uv` for a non-edge, `t_uv` for an edge.
    pub fn holds(&self, counts: &SwitchingCounts, edge: bool) -> bool {
        let within = |x: u64, (lo, hi): (i64, i64)| lo <= x as i64 && x as i64 <= hi;
        if edge {
            within(counts.t_uv, self.t_range) && counts.s_uv == 0
        } else {
            within(counts.s_uv, self.s_range) && counts.t_uv == 0
        }
    }
}

fn nonneighbor_list(a: &AdjacencyMatrix, x: usize) -> Vec<usize> {
    (0..a.n()).filter(|&y| y != x && a.get(x, y) == 0).collect()
}

/// Valid switchings `(u, v, ·, ·, ·, ·)`, enumerated as `v6 ∈ N(v1)`,
/// `v3 ∈ N(v2)`, `v5 ∉ N(v6)∪{v6}`, `v4 ∈ N(v5)` and then filtered.
pub fn switchings_from(a: &AdjacencyMatrix, u: usize, v: usize) -> Vec<Switching> {
    let mut out = Vec::new();
    let nv = a.neighbors(v);
    for v6 in a.neighbors(u) {
        for &v3 in &nv {
            for v5 in nonneighbor_list(a, v6) {
                for v4 in a.neighbors(v5) {
                    let sw = Switching([u, v, v3, v4, v5, v6]);
                    if is_valid_switching(a, &sw) {
                        out.push(sw);
                    }
                }
            }
        }
    }
    out
}

/// Valid switchings `(u, ·, ·, ·, ·, v)`, enumerated as `v2 ∉ N(v1)∪{v1}`,
/// `v3 ∈ N(v2)`, `v5 ∉ N(v6)∪{v6}`, `v4 ∈ N(v5)` and then filtered.
pub fn switchings_into(a: &AdjacencyMatrix, u: usize, v: usize) -> Vec<Switching> {
    let mut out = Vec::new();
    let nn_v = nonneighbor_list(a, v);
    for v2 in nonneighbor_list(a, u) {
        for v3 in a.neighbors(v2) {
            for &v5 in &nn_v {
                for v4 in a.neighbors(v5) {
                    let sw = Switching([u, v2, v3, v4, v5, v]);
                    if is_valid_switching(a, &sw) {
                        out.push(sw);
                    }
                }
            }
        }
    }
    out
}

pub fn count_switchings(a: &AdjacencyMatrix, u: usize, v: usize) -> Result<SwitchingCounts> {
    for x in [u, v] {
        if x >= a.n() {
            return Err(Error::VertexOutOfRange { vertex: x, n: a.n() });
        }
    }
    if u == v {
        return Err(invalid("count_switchings needs u != v"));
    }
    if !a.is_simple() {
        return Err(invalid("switchings are defined for simple graphs"));
    }
    Ok(SwitchingCounts {
        s_uv: switchings_from(a, u, v).len() as u64,
        t_uv: switchings_into(a, u, v).len() as u64,
    })
}

/// Result of auditing every ordered pair of every graph in an enumeration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingAudit {
    pub n: usize,
    pub d: usize,
    pub graphs: usize,
    pub pairs_checked: u64,
    pub bounds: CountBounds,
    pub min_s: Option<u64>,
    pub max_s: Option<u64>,
    pub min_t: Option<u64>,
    pub max_t: Option<u64>,
    pub bound_violations: u64,
    pub reversibility_checked: u64,
    pub reversibility_failures: u64,
}

impl SwitchingAudit {
    pub fn ok(&self) -> bool {
        self.bound_violations == 0 && self.reversibility_failures == 0
    }
}

/// Exhaustive check of the count ranges and of switching reversibility over
/// all simple `d`-regular graphs on `n` vertices.
pub fn audit_switchings(n: usize, d: usize) -> Result<SwitchingAudit> {
    let bits = regular_bits(n, d)?;
    let bounds = CountBounds::new(n, d);
    let mut audit = SwitchingAudit {
        n,
        d,
        graphs: bits.len(),
        pairs_checked: 0,
        bounds,
        min_s: None,
        max_s: None,
        min_t: None,
        max_t: None,
        bound_violations: 0,
        reversibility_checked: 0,
        reversibility_failures: 0,
    };
    let upd = |slot: &mut Option<u64>, x: u64, better: fn(u64, u64) -> u64| {
        *slot = Some(slot.map_or(x, |y| better(x, y)));
    };
    for &b in bits.iter() {
        let a = from_adjacency_bits(n, b);
        for u in 0..n {
            for v in 0..n {
                if u == v {
                    continue;
                }
                let from = switchings_from(&a, u, v);
                let into = switchings_into(&a, u, v);
                let counts = SwitchingCounts { s_uv: from.len() as u64, t_uv: into.len() as u64 };
                let edge = a.get(u, v) == 1;
                audit.pairs_checked += 1;
                if !bounds.holds(&counts, edge) {
                    audit.bound_violations += 1;
                }
                if edge {
                    upd(&mut audit.min_t, counts.t_uv, u64::min);
                    upd(&mut audit.max_t, counts.t_uv, u64::max);
                } else {
                    upd(&mut audit.min_s, counts.s_uv, u64::min);
                    upd(&mut audit.max_s, counts.s_uv, u64::max);
                }
                for sw in &from {
                    audit.reversibility_checked += 1;
                    let back = apply_switching(&a, sw).and_then(|a2| {
                        let ok = a2.is_regular(d as u64);
                        apply_switching(&a2, &sw.inverse()).map(|a3| ok && a3 == a)
                    });
                    if !matches!(back, Ok(true)) {
                        audit.reversibility_failures += 1;
                    }
                }
            }
        }
    }
    Ok(audit)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// Graph already contains `uv`; stays put.
    Identity,
    /// One or more switchings from the left graph produce the right graph.
    Switching,
    /// Added by the completion step; outside the bounded event.
    Completion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingEdge {
    pub left: usize,
    pub right: usize,
    pub weight: BigRational,
    pub kind: EdgeKind,
    /// The switchings realizing a [`EdgeKind::Switching`] edge.
    pub switchings: Vec<Switching>,
}

impl CouplingEdge {
    pub fn in_core(&self) -> bool {
        self.kind != EdgeKind::Completion
    }
}

#[derive(Debug, Clone)]
pub struct CouplingGraph {
    pub n: usize,
    pub d: usize,
    pub u: usize,
    pub v: usize,
    /// Bitstrings of all `d`-regular graphs, increasing.
    pub left: Vec<u64>,
    /// Bitstrings of those containing `uv`, increasing.
    pub right: Vec<u64>,
    pub edges: Vec<CouplingEdge>,
    /// Edge indices incident to each left vertex.
    pub left_edges: Vec<Vec<usize>>,
    pub left_degree_target: BigInt,
    pub right_degree_target: BigInt,
}

/// Builds the coupling graph for the ordered pair `(u, v)`.
pub fn build_coupling_graph(n: usize, d: usize, u: usize, v: usize) -> Result<CouplingGraph> {
    if n > COUPLING_MAX_N {
        return Err(Error::Infeasible(format!("coupling graphs limited to n <= {COUPLING_MAX_N}, got {n}")));
    }
    if u >= n || v >= n || u == v {
        return Err(invalid(format!("need distinct vertices below {n}, got ({u}, {v})")));
    }
    if d == 0 || d + 1 >= n || n * d % 2 == 1 {
        return Err(invalid(format!("need 1 <= d <= n-2 and n·d even, got n={n}, d={d}")));
    }
    let left: Vec<u64> = regular_bits(n, d)?.to_vec();
    let uv_bit = pair_index_bit(n, u, v);
    let right: Vec<u64> = left.iter().copied().filter(|b| b & uv_bit != 0).collect();
    let (ni, di) = (n as i64, d as i64);
    let left_target = di.pow(3) * (ni - di - 1);
    let right_target = di * di * (ni - di - 1) * (ni - 1);

    let right_index = |b: u64| right.binary_search(&b).ok();
    let mut edges: Vec<CouplingEdge> = Vec::new();
    let mut left_weight = vec![0i64; left.len()];
    let mut right_weight = vec![0i64; right.len()];
    for (li, &b) in left.iter().enumerate() {
        if b & uv_bit != 0 {
            let ri = right_index(b).expect("graph with uv is a right vertex");
            edges.push(CouplingEdge {
                left: li,
                right: ri,
                weight: BigRational::from_integer(left_target.into()),
                kind: EdgeKind::Identity,
                switchings: Vec::new(),
            });
            left_weight[li] += left_target;
            right_weight[ri] += left_target;
            continue;
        }
        let a = from_adjacency_bits(n, b);
        let mut by_target: BTreeMap<usize, Vec<Switching>> = BTreeMap::new();
        for sw in switchings_from(&a, u, v) {
            let out = adjacency_bits(&apply_switching(&a, &sw)?);
            let ri = right_index(out)
                .ok_or_else(|| Error::CompletionFailed("switching left the state space".into()))?;
            by_target.entry(ri).or_default().push(sw);
        }
        for (ri, sws) in by_target {
            let w = sws.len() as i64;
            left_weight[li] += w;
            right_weight[ri] += w;
            edges.push(CouplingEdge {
                left: li,
                right: ri,
                weight: BigRational::from_integer(w.into()),
                kind: EdgeKind::Switching,
                switchings: sws,
            });
        }
    }

    // greedy completion: left in bitstring order, each deficit poured into the
    // least right vertices that still have room
    let mut room: Vec<i64> = right_weight.iter().map(|&w| right_target - w).collect();
    if let Some(ri) = room.iter().position(|&r| r < 0) {
        return Err(Error::CompletionFailed(format!("right vertex {ri} exceeds its target before completion")));
    }
    let mut cursor = 0;
    for li in 0..left.len() {
        let mut deficit = left_target - left_weight[li];
        if deficit < 0 {
            return Err(Error::CompletionFailed(format!("left vertex {li} exceeds its target")));
        }
        while deficit > 0 {
            while cursor < room.len() && room[cursor] == 0 {
                cursor += 1;
            }
            if cursor == room.len() {
                return Err(Error::CompletionFailed("ran out of right capacity".into()));
            }
            let w = deficit.min(room[cursor]);
            deficit -= w;
            room[cursor] -= w;
            edges.push(CouplingEdge {
                left: li,
                right: cursor,
                weight: BigRational::from_integer(w.into()),
                kind: EdgeKind::Completion,
                switchings: Vec::new(),
            });
        }
    }
    if room.iter().any(|&r| r != 0) {
        return Err(Error::CompletionFailed("right capacity left over after completion".into()));
    }

    let mut left_edges = vec![Vec::new(); left.len()];
    for (k, e) in edges.iter().enumerate() {
        left_edges[e.left].push(k);
    }
    Ok(CouplingGraph {
        n,
        d,
        u,
        v,
        left,
        right,
        edges,
        left_edges,
        left_degree_target: left_target.into(),
        right_degree_target: right_target.into(),
    })
}

/// Outcome of walking one coupling edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalSample {
    pub graph: AdjacencyMatrix,
    pub bounded: bool,
    pub kind: EdgeKind,
    /// One switching realizing the step, for switching edges.
    pub switching: Option<Switching>,
}

impl CouplingGraph {
    pub fn left_index(&self, a: &AdjacencyMatrix) -> Option<usize> {
        if a.n() != self.n || !a.is_simple() {
            return None;
        }
        self.left.binary_search(&adjacency_bits(a)).ok()
    }

    pub fn left_degree(&self, li: usize, core_only: bool) -> BigRational {
        self.left_edges[li]
            .iter()
            .map(|&k| &self.edges[k])
            .filter(|e| !core_only || e.in_core())
            .fold(BigRational::zero(), |acc, e| acc + &e.weight)
    }

    pub fn right_degrees(&self, core_only: bool) -> Vec<BigRational> {
        let mut out = vec![BigRational::zero(); self.right.len()];
        for e in self.edges.iter().filter(|e| !core_only || e.in_core()) {
            out[e.right] += &e.weight;
        }
        out
    }

    /// Walk one edge from `a` with probability `weight / left target`.
    pub fn sample_conditional<R: Rng + ?Sized>(&self, a: &AdjacencyMatrix, rng: &mut R) -> Result<ConditionalSample> {
        let li = self.left_index(a).ok_or(Error::UnknownState)?;
        let total = self.left_degree_target.to_f64().expect("finite target");
        let mut r = rng.random::<f64>() * total;
        let incident = &self.left_edges[li];
        let mut chosen = *incident.last().expect("every left vertex has an edge");
        for &k in incident {
            let w = self.edges[k].weight.to_f64().expect("finite weight");
            if r < w {
                chosen = k;
                break;
            }
            r -= w;
        }
        let e = &self.edges[chosen];
        let switching = match e.kind {
            EdgeKind::Switching => Some(e.switchings[rng.random_range(0..e.switchings.len())]),
            _ => None,
        };
        Ok(ConditionalSample {
            graph: from_adjacency_bits(self.n, self.right[e.right]),
            bounded: e.in_core(),
            kind: e.kind,
            switching,
        })
    }

    /// Exact law of the output when the input is uniform over the left side.
    pub fn output_law(&self) -> Vec<BigRational> {
        let denom = BigRational::from_integer(self.left_degree_target.clone() * BigInt::from(self.left.len()));
        self.right_degrees(false).into_iter().map(|w| w / &denom).collect()
    }

    /// Exact audit of the coupling: degrees, marginal, bounded probabilities.
    pub fn audit(&self) -> CouplingAudit {
        let (n, d) = (self.n as i64, self.d as i64);
        let lt = BigRational::from_integer(self.left_degree_target.clone());
        let rt = BigRational::from_integer(self.right_degree_target.clone());
        let left_full: Vec<BigRational> = (0..self.left.len()).map(|li| self.left_degree(li, false)).collect();
        let left_core: Vec<BigRational> = (0..self.left.len()).map(|li| self.left_degree(li, true)).collect();
        let right_full = self.right_degrees(false);
        let right_core = self.right_degrees(true);
        let biregular = left_full.iter().all(|w| *w == lt) && right_full.iter().all(|w| *w == rt);

        let int = |x: i64| BigRational::from_integer(x.into());
        let core_left_range = (int((d.pow(3) * (n - 2 * d - 2)).max(0)), int(d.pow(3) * (n - d - 1)));
        let core_right_range = (int(d * d * (n - d - 1) * (n - d - 2)), int(d * d * (n - d - 1) * (n - 1)));
        let in_range = |w: &BigRational, (lo, hi): &(BigRational, BigRational)| lo <= w && w <= hi;
        let core_degrees_ok = left_core.iter().all(|w| in_range(w, &core_left_range))
            && right_core.iter().all(|w| in_range(w, &core_right_range));

        let uniform = BigRational::new(1.into(), BigInt::from(self.right.len()));
        let tv = self
            .output_law()
            .into_iter()
            .fold(BigRational::zero(), |acc, p| acc + (p - &uniform).abs())
            / int(2);

        let given_out: Vec<BigRational> = right_core.iter().map(|w| w / &rt).collect();
        let given_in: Vec<BigRational> = left_core.iter().map(|w| w / &lt).collect();
        let need_out = BigRational::new((n - d - 2).into(), (n - 1).into());
        let need_in = BigRational::new((n - 2 * d - 2).into(), (n - d - 1).into());
        let min = |xs: &[BigRational]| xs.iter().min().cloned().unwrap_or_else(BigRational::zero);
        let min_out = min(&given_out);
        let min_in = min(&given_in);

        CouplingAudit {
            n: self.n,
            d: self.d,
            u: self.u,
            v: self.v,
            left_size: self.left.len(),
            right_size: self.right.len(),
            left_degree_target: self.left_degree_target.to_string(),
            right_degree_target: self.right_degree_target.to_string(),
            total_weight: (lt.clone() * int(self.left.len() as i64)).to_string(),
            biregular,
            core_degrees_ok,
            marginal_tv: tv.to_string(),
            marginal_tv_f64: tv.to_f64().unwrap_or(f64::NAN),
            min_bounded_given_output: min_out.to_f64().unwrap_or(f64::NAN),
            required_given_output: need_out.to_f64().unwrap_or(f64::NAN),
            bounded_given_output_ok: min_out >= need_out,
            min_bounded_given_input: min_in.to_f64().unwrap_or(f64::NAN),
            required_given_input: need_in.to_f64().unwrap_or(f64::NAN),
            bounded_given_input_ok: min_in >= need_in,
            core_edges: self.edges.iter().filter(|e| e.in_core()).count(),
            completion_edges: self.edges.iter().filter(|e| !e.in_core()).count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingAudit {
    pub n: usize,
    pub d: usize,
    pub u: usize,
    pub v: usize,
    pub left_size: usize,
    pub right_size: usize,
    pub left_degree_target: String,
    pub right_degree_target: String,
    pub total_weight: String,
    pub biregular: bool,
    pub core_degrees_ok: bool,
    /// Exact rational total variation distance to uniform.
    pub marginal_tv: String,
    pub marginal_tv_f64: f64,
    pub min_bounded_given_output: f64,
    pub required_given_output: f64,
    pub bounded_given_output_ok: bool,
    pub min_bounded_given_input: f64,
    pub required_given_input: f64,
    pub bounded_given_input_ok: bool,
    pub core_edges: usize,
    pub completion_edges: usize,
}

impl CouplingAudit {
    pub fn ok(&self) -> bool {
        self.biregular
            && self.core_degrees_ok
            && self.marginal_tv == "0"
            && self.bounded_given_output_ok
            && self.bounded_given_input_ok
    }
}

/// Coupling graphs for every ordered pair `u != v`.
#[derive(Debug, Clone)]
pub struct CouplingFamily {
    pub n: usize,
    pub d: usize,
    graphs: Vec<CouplingGraph>,
}

impl CouplingFamily {
    pub fn build(n: usize, d: usize) -> Result<Self> {
        use rayon::prelude::*;
        let pairs: Vec<(usize, usize)> =
            (0..n).flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v))).collect();
        let graphs = pairs.par_iter().map(|&(u, v)| build_coupling_graph(n, d, u, v)).collect::<Result<_>>()?;
        Ok(Self { n, d, graphs })
    }

    pub fn get(&self, u: usize, v: usize) -> &CouplingGraph {
        assert!(u != v && u < self.n && v < self.n);
        &self.graphs[u * (self.n - 1) + if v > u { v - 1 } else { v }]
    }

    pub fn graphs(&self) -> &[CouplingGraph] {
        &self.graphs
    }
}

/// One draw of `(f_Q(A), f_Q(A'))`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub x: f64,
    pub xs: f64,
    pub bounded: bool,
    pub pair: (usize, usize),
    pub step: ConditionalSample,
}

fn check_coupling_q(q: &DenseMatrix<f64>, n: usize) -> Result<f64> {
    if q.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.n() });
    }
    if let Some((u, v)) = q.asymmetry() {
        return Err(Error::Asymmetric(u, v));
    }
    if (0..n).any(|u| q.get(u, u) != 0.0) || q.as_slice().iter().any(|&x| !(x >= 0.0)) {
        return Err(invalid("Q must be nonnegative with zero diagonal"));
    }
    let total: f64 = q.as_slice().iter().sum();
    if total == 0.0 {
        return Err(invalid("Q is identically zero"));
    }
    Ok(total)
}

/// Size-biased partner of `f_Q(A)`: draw `(V1, V2)` with probability
/// proportional to `Q_{V1V2}` and walk the coupling graph for that pair.
pub fn coupled_sizebias_pair<R: Rng + ?Sized>(
    a: &AdjacencyMatrix,
    q: &DenseMatrix<f64>,
    family: &CouplingFamily,
    rng: &mut R,
) -> Result<CoupledPair> {
    let total = check_coupling_q(q, family.n)?;
    let mut r = rng.random::<f64>() * total;
    let mut pair = None;
    let mut last = None;
    'outer: for u in 0..family.n {
        for v in 0..family.n {
            let w = q.get(u, v);
            if w <= 0.0 {
                continue;
            }
            last = Some((u, v));
            if r < w {
                pair = Some((u, v));
                break 'outer;
            }
            r -= w;
        }
    }
    let (u, v) = pair.or(last).expect("Q has a positive entry");
    let step = family.get(u, v).sample_conditional(a, rng)?;
    Ok(CoupledPair {
        x: linear_form(q, a)?,
        xs: linear_form(q, &step.graph)?,
        bounded: step.bounded,
        pair: (u, v),
        step,
    })
}

/// Exact `(E[X f(X)], μ E[f(X^s)])` for `X = f_Q(A)` with `A` uniform, using
/// the coupling family to construct `X^s`.
pub fn exact_sizebias_identity(
    q: &DenseMatrix<f64>,
    family: &CouplingFamily,
    f: impl Fn(f64) -> f64,
) -> Result<(f64, f64)> {
    let (n, d) = (family.n, family.d);
    let total = check_coupling_q(q, n)?;
    let bits = regular_bits(n, d)?;
    let count = bits.len() as f64;
    let values: Vec<f64> =
        bits.iter().map(|&b| linear_form(q, &from_adjacency_bits(n, b))).collect::<Result<_>>()?;
    let lhs = values.iter().map(|&x| x * f(x)).sum::<f64>() / count;
    let mu = total * d as f64 / (n - 1) as f64;
    let mut ef = 0.0;
    for u in 0..n {
        for v in 0..n {
            let w = q.get(u, v);
            if u == v || w == 0.0 {
                continue;
            }
            let cg = family.get(u, v);
            let lt = cg.left_degree_target.to_f64().unwrap();
            let mut acc = 0.0;
            for e in &cg.edges {
                let out = linear_form(q, &from_adjacency_bits(n, cg.right[e.right]))?;
                acc += e.weight.to_f64().unwrap() / lt * f(out);
            }
            ef += w / total * acc / count;
        }
    }
    Ok((lhs, mu * ef))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::enumerate_regular;

    #[test]
    fn validity_conditions() {
        // 6-cycle 0-1-2-3-4-5-0
        let c6 = AdjacencyMatrix::cycle(6);
        // (0,2,1,4,3,5): needs A21, A43, A50 = 1 and A02, A14, A35 = 0
        assert!(is_valid_switching(&c6, &Switching([0, 2, 1, 4, 3, 5])));
        assert!(!is_valid_switching(&c6, &Switching([0, 1, 2, 3, 4, 5])));
        assert!(!is_valid_switching(&c6, &Switching([0, 0, 1, 4, 3, 5])));
    }

    #[test]
    fn apply_and_invert() {
        let c6 = AdjacencyMatrix::cycle(6);
        let sw = Switching([0, 2, 1, 4, 3, 5]);
        let out = apply_switching(&c6, &sw).unwrap();
        assert!(out.is_regular(2) && out.is_simple());
        let changed = (0..36).filter(|&k| out.entries()[k] != c6.entries()[k]).count();
        assert_eq!(changed, 12);
        assert_eq!(apply_switching(&out, &sw.inverse()).unwrap(), c6);
        assert!(apply_switching(&c6, &Switching([0, 1, 2, 3, 4, 5])).is_err());
    }

    #[test]
    fn five_cycle_counts() {
        let c5 = AdjacencyMatrix::cycle(5);
        let c = count_switchings(&c5, 0, 2).unwrap();
        assert!(c.s_uv <= 16);
        assert_eq!(c.t_uv, 0);
        // brute force over all 6-tuples
        let brute = (0..5usize.pow(4))
            .filter(|&k| {
                let t = [k % 5, k / 5 % 5, k / 25 % 5, k / 125];
                is_valid_switching(&c5, &Switching([0, 2, t[0], t[1], t[2], t[3]]))
            })
            .count() as u64;
        assert_eq!(c.s_uv, brute);
    }

    #[test]
    fn coupling_graph_small_case() {
        let cg = build_coupling_graph(5, 2, 0, 1).unwrap();
        assert_eq!((cg.left.len(), cg.right.len()), (12, 6));
        assert_eq!(cg.left_degree_target, 16.into());
        assert_eq!(cg.right_degree_target, 32.into());
        let audit = cg.audit();
        assert_eq!(audit.total_weight, "192");
        assert!(audit.ok(), "{audit:?}");
    }

    #[test]
    fn count_frames_match_brute_force() {
        for a in enumerate_regular(6, 3).unwrap().iter().take(5) {
            for (u, v) in [(0, 1), (2, 5)] {
                let from = switchings_from(a, u, v).len();
                let into = switchings_into(a, u, v).len();
                let mut bf = (0, 0);
                for k in 0..6usize.pow(4) {
                    let t = [k % 6, k / 6 % 6, k / 36 % 6, k / 216];
                    bf.0 += is_valid_switching(a, &Switching([u, v, t[0], t[1], t[2], t[3]])) as usize;
                    bf.1 += is_valid_switching(a, &Switching([u, t[0], t[1], t[2], t[3], v])) as usize;
                }
                assert_eq!((from, into), bf);
            }
        }
    }
}
