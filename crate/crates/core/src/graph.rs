//! Graph data model: integer adjacency matrices of (multi)graphs, vertex
//! sets, edge counts and the linear forms `f_Q(M) = Σ Q_uv M_uv`.
//!
//! Vertices are `0..n` in the library API. The text graph format uses
//! 1-based labels.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{compensated_sum, Real};

/// Linear forms over more than this many vertices use compensated summation.
const COMPENSATED_THRESHOLD: usize = 1000;

/// Dense row-major `n × n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Copy> DenseMatrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for u in 0..n {
            for v in 0..n {
                data.push(f(u, v));
            }
        }
        Self { n, data }
    }

    pub fn from_vec(n: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: data.len() });
        }
        Ok(Self { n, data })
    }

    pub fn filled(n: usize, value: T) -> Self {
        Self { n, data: vec![value; n * n] }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> T {
        self.data[u * self.n + v]
    }

    #[inline]
    pub fn set(&mut self, u: usize, v: usize, value: T) {
        self.data[u * self.n + v] = value;
    }

    pub fn row(&self, u: usize) -> &[T] {
        &self.data[u * self.n..(u + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<S: Copy>(&self, f: impl Fn(T) -> S) -> DenseMatrix<S> {
        DenseMatrix { n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl<T: Copy + PartialEq> DenseMatrix<T> {
    /// First asymmetric position, if any.
    pub fn asymmetry(&self) -> Option<(usize, usize)> {
        for u in 0..self.n {
            for v in (u + 1)..self.n {
                if self.get(u, v) != self.get(v, u) {
                    return Some((u, v));
                }
            }
        }
        None
    }

    pub fn is_symmetric(&self) -> bool {
        self.asymmetry().is_none()
    }
}

impl<T: Real> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, T::zero())
    }

    /// Entrywise `a·self + b·other`.
    pub fn combine(&self, a: T, other: &Self, b: T) -> Result<Self> {
        check_dims(self.n, other.n)?;
        Ok(Self {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(&x, &y)| a * x + b * y).collect(),
        })
    }

    /// Hadamard square `Q ∘ Q`.
    pub fn hadamard_square(&self) -> Self {
        self.map(|x| x * x)
    }

    pub fn max_entry(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &x| m.max(x.abs()))
    }

    pub fn sum(&self) -> T {
        compensated_sum(self.data.iter().copied())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |u, v| self.get(v, u))
    }
}

fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Adjacency matrix of a graph or multigraph. A loop at `v` is stored as
/// `entries[v][v] = 2` (it contributes twice to the degree).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    n: usize,
    entries: Vec<u32>,
    multigraph: bool,
}

impl AdjacencyMatrix {
    /// Validates symmetry and, for simple graphs, zero diagonal and 0/1 entries.
    pub fn from_entries(n: usize, entries: Vec<u32>, multigraph: bool) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: entries.len() });
        }
        let a = Self { n, entries, multigraph };
        for u in 0..n {
            for v in u..n {
                if a.get(u, v) != a.get(v, u) {
                    return Err(Error::Asymmetric(u, v));
                }
                if !multigraph && (a.get(u, v) > 1 || (u == v && a.get(u, u) != 0)) {
                    return Err(invalid(format!(
                        "simple graph has entry {} at ({u}, {v})",
                        a.get(u, v)
                    )));
                }
            }
        }
        Ok(a)
    }

    /// Build from an undirected edge list `(u, v, weight)`. A loop `(v, v, w)`
    /// adds `w` to the diagonal entry, so a single loop is written `(v, v, 2)`.
    pub fn from_edges(n: usize, edges: &[(usize, usize, u32)], multigraph: bool) -> Result<Self> {
        let mut entries = vec![0u32; n * n];
        for &(u, v, w) in edges {
            for x in [u, v] {
                if x >= n {
                    return Err(Error::VertexOutOfRange { vertex: x, n });
                }
            }
            if u == v {
                entries[u * n + u] += w;
            } else {
                entries[u * n + v] += w;
                entries[v * n + u] += w;
            }
        }
        Self::from_entries(n, entries, multigraph)
    }

    pub fn empty(n: usize) -> Self {
        Self { n, entries: vec![0; n * n], multigraph: false }
    }

    pub fn complete(n: usize) -> Self {
        let mut a = Self::empty(n);
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    a.entries[u * n + v] = 1;
                }
            }
        }
        a
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1)).collect();
        Self::from_edges(n, &edges, false).expect("cycle is simple for n >= 3")
    }

    pub fn petersen() -> Self {
        let mut edges = Vec::new();
        for i in 0..5 {
            edges.push((i, (i + 1) % 5, 1));
            edges.push((i, i + 5, 1));
            edges.push((5 + i, 5 + (i + 2) % 5, 1));
        }
        Self::from_edges(10, &edges, false).expect("petersen graph")
    }

    /// Complement of a simple graph: `B_uv = 1 - A_uv` off the diagonal.
    pub fn complement(&self) -> Result<Self> {
        if !self.is_simple() {
            return Err(invalid("complement requires a simple graph"));
        }
        let n = self.n;
        let entries = (0..n * n)
            .map(|k| if k / n == k % n { 0 } else { 1 - self.entries[k] })
            .collect();
        Ok(Self { n, entries, multigraph: false })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, u: usize, v: usize) -> u32 {
        self.entries[u * self.n + v]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn is_multigraph(&self) -> bool {
        self.multigraph
    }

    /// No loops and no entry above 1, regardless of the multigraph flag.
    pub fn is_simple(&self) -> bool {
        (0..self.n).all(|u| self.get(u, u) == 0) && self.entries.iter().all(|&x| x <= 1)
    }

    pub fn degree(&self, v: usize) -> Result<u64> {
        self.check_vertex(v)?;
        Ok(self.row(v).iter().map(|&x| x as u64).sum())
    }

    pub fn degrees(&self) -> Vec<u64> {
        (0..self.n).map(|v| self.row(v).iter().map(|&x| x as u64).sum()).collect()
    }

    pub fn is_regular(&self, d: u64) -> bool {
        self.degrees().into_iter().all(|k| k == d)
    }

    pub fn row(&self, u: usize) -> &[u32] {
        &self.entries[u * self.n..(u + 1) * self.n]
    }

    pub fn neighbors(&self, v: usize) -> Vec<usize> {
        (0..self.n).filter(|&u| u != v && self.get(v, u) > 0).collect()
    }

    /// Vertices that are neither `v` nor adjacent to `v`.
    pub fn nonneighbors(&self, v: usize) -> Result<VertexSet> {
        self.check_vertex(v)?;
        let members = (0..self.n).filter(|&u| u != v && self.get(v, u) == 0).collect();
        Ok(VertexSet { n: self.n, members })
    }

    /// Undirected edge list with multiplicities, `u <= v`.
    pub fn edges(&self) -> Vec<(usize, usize, u32)> {
        let mut out = Vec::new();
        for u in 0..self.n {
            for v in u..self.n {
                let w = self.get(u, v);
                if w > 0 {
                    out.push((u, v, w));
                }
            }
        }
        out
    }

    pub fn trace(&self) -> u64 {
        (0..self.n).map(|u| self.get(u, u) as u64).sum()
    }

    /// `e_A(S, T) = Σ_{u∈S} Σ_{v∈T} A_uv`.
    pub fn edge_count(&self, s: &VertexSet, t: &VertexSet) -> Result<u64> {
        check_dims(self.n, s.n)?;
        check_dims(self.n, t.n)?;
        let mut total = 0u64;
        for &u in &s.members {
            let row = self.row(u);
            for &v in &t.members {
                total += row[v] as u64;
            }
        }
        Ok(total)
    }

    pub fn to_dense<T: Real>(&self) -> DenseMatrix<T> {
        DenseMatrix::from_fn(self.n, |u, v| T::from_count(self.get(u, v) as u64))
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v >= self.n {
            return Err(Error::VertexOutOfRange { vertex: v, n: self.n });
        }
        Ok(())
    }
}

/// Subset of `0..n`, stored sorted without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VertexSet {
    n: usize,
    members: Vec<usize>,
}

impl VertexSet {
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut members: Vec<usize> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        if let Some(&m) = members.last() {
            if m >= n {
                return Err(Error::VertexOutOfRange { vertex: m, n });
            }
        }
        Ok(Self { n, members })
    }

    pub fn empty(n: usize) -> Self {
        Self { n, members: Vec::new() }
    }

    pub fn full(n: usize) -> Self {
        Self { n, members: (0..n).collect() }
    }

    /// Members of the bitmask `mask` (bit `i` = vertex `i`).
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self { n, members: (0..n).filter(|&i| mask >> i & 1 == 1).collect() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn intersection_len(&self, other: &Self) -> usize {
        self.members.iter().filter(|&&v| other.contains(v)).count()
    }

    pub fn complement(&self) -> Self {
        Self { n: self.n, members: (0..self.n).filter(|&v| !self.contains(v)).collect() }
    }

    pub fn indicator(&self) -> Vec<bool> {
        let mut ind = vec![false; self.n];
        for &v in &self.members {
            ind[v] = true;
        }
        ind
    }

    /// 1-based labels, for display and files.
    pub fn labels(&self) -> Vec<usize> {
        self.members.iter().map(|v| v + 1).collect()
    }
}

/// Mean and variance proxy of `f_Q(M)` given `E M`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFormStats<T> {
    /// `μ = f_Q(E M)`
    pub mu: T,
    /// `σ̃² = f_{Q∘Q}(E M)`
    pub sigma_tilde_sq: T,
    /// Largest entry of `Q`.
    pub a: T,
}

/// `f_Q(M) = Σ_{u,v} Q_uv M_uv`.
pub fn linear_form<T: Real>(q: &DenseMatrix<T>, m: &AdjacencyMatrix) -> Result<T> {
    check_dims(q.n(), m.n())?;
    let terms = q
        .as_slice()
        .iter()
        .zip(m.entries())
        .filter(|(_, &w)| w != 0)
        .map(|(&x, &w)| x * T::from_count(w as u64));
    if m.n() > COMPENSATED_THRESHOLD {
        Ok(compensated_sum(terms))
    } else {
        Ok(terms.fold(T::zero(), |acc, x| acc + x))
    }
}

/// `f_Q` evaluated on a real-valued matrix such as `E M`.
pub fn linear_form_dense<T: Real>(q: &DenseMatrix<T>, m: &DenseMatrix<T>) -> Result<T> {
    check_dims(q.n(), m.n())?;
    let terms = q.as_slice().iter().zip(m.as_slice()).map(|(&x, &y)| x * y);
    if m.n() > COMPENSATED_THRESHOLD {
        Ok(compensated_sum(terms))
    } else {
        Ok(terms.fold(T::zero(), |acc, x| acc + x))
    }
}

pub fn linear_form_stats<T: Real>(
    q: &DenseMatrix<T>,
    expected: &DenseMatrix<T>,
) -> Result<LinearFormStats<T>> {
    check_dims(q.n(), expected.n())?;
    if let Some(&bad) = expected.as_slice().iter().find(|&&x| x < T::zero()) {
        return Err(Error::Domain { value: bad.as_f64(), domain: "E M entries >= 0" });
    }
    if q.n() == 0 {
        return Ok(LinearFormStats { mu: T::zero(), sigma_tilde_sq: T::zero(), a: T::zero() });
    }
    Ok(LinearFormStats {
        mu: linear_form_dense(q, expected)?,
        sigma_tilde_sq: linear_form_dense(&q.hadamard_square(), expected)?,
        a: q.max_entry(),
    })
}

/// `Q = ½(1_S 1_Tᵀ + 1_T 1_Sᵀ)`, the matrix with `f_Q(A) = e_A(S, T)`.
pub fn set_pair_matrix<T: Real>(s: &VertexSet, t: &VertexSet) -> Result<DenseMatrix<T>> {
    check_dims(s.n(), t.n())?;
    let (is, it) = (s.indicator(), t.indicator());
    let half = T::lit(0.5);
    Ok(DenseMatrix::from_fn(s.n(), |u, v| {
        let mut x = T::zero();
        if is[u] && it[v] {
            x = x + half;
        }
        if it[u] && is[v] {
            x = x + half;
        }
        x
    }))
}

/// Parse the text graph format:
///
/// ```text
/// n d multigraph_flag
/// u v [w]
/// ```
///
/// Labels are 1-based, edges undirected, `w` defaults to 1, and a loop is
/// written once with its diagonal weight. `d` is either the declared degree
/// (checked) or `-` for graphs that are not regular. A pair may be listed in
/// both orientations only with equal weights; anything else is rejected as
/// asymmetric.
pub fn parse_graph(text: &str) -> Result<AdjacencyMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse { line: hline, msg: "header must be `n d multigraph_flag`".into() });
    }
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let n: usize = fields[0].parse().map_err(|_| perr(hline, format!("bad n `{}`", fields[0])))?;
    let d: Option<u64> = match fields[1] {
        "-" => None,
        s => Some(s.parse().map_err(|_| perr(hline, format!("bad d `{s}`")))?),
    };
    let multigraph = match fields[2] {
        "0" | "false" => false,
        "1" | "true" => true,
        s => return Err(perr(hline, format!("bad multigraph flag `{s}`"))),
    };

    let mut entries = vec![0u32; n * n];
    let mut seen = std::collections::HashMap::new();
    for (line, l) in lines {
        let f: Vec<&str> = l.split_whitespace().collect();
        if f.len() != 2 && f.len() != 3 {
            return Err(perr(line, "edge line must be `u v [w]`".into()));
        }
        let label = |s: &str| -> Result<usize> {
            let x: usize = s.parse().map_err(|_| perr(line, format!("bad label `{s}`")))?;
            if x == 0 || x > n {
                return Err(perr(line, format!("label {x} out of range 1..={n}")));
            }
            Ok(x - 1)
        };
        let (u, v) = (label(f[0])?, label(f[1])?);
        let w: u32 = match f.get(2) {
            Some(s) => s.parse().map_err(|_| perr(line, format!("bad weight `{s}`")))?,
            None => 1,
        };
        if let Some(&(prev_u, prev_w)) = seen.get(&(u.min(v), u.max(v))) {
            if prev_u == u || prev_w != w {
                return Err(perr(line, format!("pair ({}, {}) listed twice inconsistently", u + 1, v + 1)));
            }
            continue;
        }
        seen.insert((u.min(v), u.max(v)), (u, w));
        entries[u * n + v] += w;
        if u != v {
            entries[v * n + u] += w;
        }
    }
    let a = AdjacencyMatrix::from_entries(n, entries, multigraph).map_err(|e| perr(0, e.to_string()))?;
    if let Some(d) = d {
        if !a.is_regular(d) {
            return Err(perr(hline, format!("graph is not {d}-regular")));
        }
    }
    Ok(a)
}

/// Inverse of [`parse_graph`]. `d` is written when the graph is regular.
pub fn write_graph(a: &AdjacencyMatrix) -> String {
    let degs = a.degrees();
    let d = match degs.first() {
        Some(&d0) if degs.iter().all(|&k| k == d0) => d0.to_string(),
        None => "0".to_string(),
        _ => "-".to_string(),
    };
    let mut out = format!("{} {} {}\n", a.n(), d, u8::from(a.is_multigraph()));
    for (u, v, w) in a.edges() {
        if w == 1 {
            let _ = writeln!(out, "{} {}", u + 1, v + 1);
        } else {
            let _ = writeln!(out, "{} {} {}", u + 1, v + 1, w);
        }
    }
    out
}
