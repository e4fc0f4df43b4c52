//! Dense symmetric eigensolver (Householder tridiagonalization followed by
//! implicit QL), a cyclic Jacobi cross-check, and spectral-gap statistics
//! `λ(A) = max(λ₂, -λₙ)`.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{AdjacencyMatrix, DenseMatrix};
use crate::scalar::Real;

/// Largest `n` for which the Jacobi cross-check is run by default.
pub const JACOBI_MAX_N: usize = 64;

const QL_MAX_ITER_PER_VALUE: usize = 60;

/// Eigenvalues in descending order with the matching orthonormal
/// eigenvectors (`vectors[k]` belongs to `values[k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    pub vectors: Vec<Vec<T>>,
}

/// `1e-9 · n · max|A_uv|`
pub fn residual_tol<T: Real>(a: &DenseMatrix<T>) -> T {
    T::lit(1e-9) * T::from_count(a.n() as u64) * a.max_abs().max(T::min_positive_value())
}

fn check_symmetric<T: Real>(a: &DenseMatrix<T>) -> Result<()> {
    let n = a.n();
    let tol = T::epsilon() * T::lit(16.0) * a.max_abs();
    for u in 0..n {
        for v in u + 1..n {
            if (a.get(u, v) - a.get(v, u)).abs() > tol {
                return Err(Error::Asymmetric(u, v));
            }
        }
    }
    Ok(())
}

/// All eigenvalues of a symmetric matrix, descending.
pub fn eig_sym<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    check_symmetric(a)?;
    let (d, _) = tridiagonal_ql(a, false)?;
    Ok(d)
}

pub fn eig_sym_vectors<T: Real>(a: &DenseMatrix<T>) -> Result<EigenDecomposition<T>> {
    check_symmetric(a)?;
    let (values, v) = tridiagonal_ql(a, true)?;
    let v = v.expect("vectors requested");
    let n = a.n();
    let vectors = (0..n).map(|k| (0..n).map(|i| v[i * n + k]).collect()).collect();
    Ok(EigenDecomposition { values, vectors })
}

/// Householder reduction to tridiagonal form, then implicit QL. Returns the
/// eigenvalues descending and, when asked, the eigenvector matrix
/// (row-major, column `k` for the `k`-th value).
fn tridiagonal_ql<T: Real>(a: &DenseMatrix<T>, want_vectors: bool) -> Result<(Vec<T>, Option<Vec<T>>)> {
    let n = a.n();
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(Vec::new)));
    }
    let zero = T::zero();
    let one = T::one();
    let two = T::lit(2.0);
    let mut v: Vec<T> = a.as_slice().to_vec();
    let mut d: Vec<T> = (0..n).map(|j| v[(n - 1) * n + j]).collect();
    let mut e: Vec<T> = vec![zero; n];
    let at = |i: usize, j: usize| i * n + j;

    for i in (1..n).rev() {
        let scale: T = d[..i].iter().map(|x| x.abs()).fold(zero, |s, x| s + x);
        let mut h = zero;
        if scale == zero {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = zero;
                v[at(j, i)] = zero;
            }
        } else {
            for x in d[..i].iter_mut() {
                *x = *x / scale;
                h = h + *x * *x;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > zero {
                g = -g;
            }
            e[i] = scale * g;
            h = h - f * g;
            d[i - 1] = f - g;
            for x in e[..i].iter_mut() {
                *x = zero;
            }
            for j in 0..i {
                f = d[j];
                v[at(j, i)] = f;
                g = e[j] + v[at(j, j)] * f;
                for k in j + 1..i {
                    g = g + v[at(k, j)] * d[k];
                    e[k] = e[k] + v[at(k, j)] * f;
                }
                e[j] = g;
            }
            f = zero;
            for j in 0..i {
                e[j] = e[j] / h;
                f = f + e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] = e[j] - hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[at(k, j)] = v[at(k, j)] - (f * e[k] + g * d[k]);
                }
                d[j] = v[at(i - 1, j)];
                v[at(i, j)] = zero;
            }
        }
        d[i] = h;
    }

    if want_vectors {
        for i in 0..n - 1 {
            v[at(n - 1, i)] = v[at(i, i)];
            v[at(i, i)] = one;
            let h = d[i + 1];
            if h != zero {
                for k in 0..=i {
                    d[k] = v[at(k, i + 1)] / h;
                }
                for j in 0..=i {
                    let mut g = zero;
                    for k in 0..=i {
                        g = g + v[at(k, i + 1)] * v[at(k, j)];
                    }
                    for k in 0..=i {
                        v[at(k, j)] = v[at(k, j)] - g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[at(k, i + 1)] = zero;
            }
        }
        for j in 0..n {
            d[j] = v[at(n - 1, j)];
            v[at(n - 1, j)] = zero;
        }
        v[at(n - 1, n - 1)] = one;
    } else {
        for j in 0..n {
            d[j] = v[at(j, j)];
        }
    }
    e[0] = zero;

    // implicit QL on the tridiagonal (d, e)
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = zero;
    let mut f = zero;
    let mut tst1 = zero;
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER_PER_VALUE {
                    return Err(invalid("QL iteration did not converge"));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(one);
                if p < zero {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d[l + 2..].iter_mut() {
                    *x = *x - h;
                }
                f = f + h;
                p = d[m];
                let mut c = one;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = zero;
                let mut s2 = zero;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if want_vectors {
                        for k in 0..n {
                            h = v[at(k, i + 1)];
                            v[at(k, i + 1)] = s * v[at(k, i)] + c * h;
                            v[at(k, i)] = c * v[at(k, i)] - s * h;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] = d[l] + f;
        e[l] = zero;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].partial_cmp(&d[i]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = want_vectors.then(|| {
        let mut out = vec![zero; n * n];
        for (k, &src) in order.iter().enumerate() {
            for i in 0..n {
                out[at(i, k)] = v[at(i, src)];
            }
        }
        out
    });
    Ok((values, vectors))
}

/// Cyclic Jacobi eigenvalues, descending.
pub fn eig_jacobi<T: Real>(a: &DenseMatrix<T>) -> Result<Vec<T>> {
    check_symmetric(a)?;
    let n = a.n();
    let mut m: Vec<T> = a.as_slice().to_vec();
    let zero = T::zero();
    let total: T = m.iter().map(|&x| x * x).sum::<T>();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| m[p * n + q] * m[p * n + q])
            .sum();
        if off <= T::epsilon() * T::epsilon() * total {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == zero {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut d: Vec<T> = (0..n).map(|i| m[i * n + i]).collect();
    d.sort_by(|x, y| y.partial_cmp(x).expect("finite eigenvalues"));
    Ok(d)
}

/// `max_k |A v_k - λ_k v_k|`.
pub fn max_residual<T: Real>(a: &DenseMatrix<T>, eig: &EigenDecomposition<T>) -> T {
    let n = a.n();
    eig.values
        .iter()
        .zip(&eig.vectors)
        .map(|(&lam, vec)| {
            (0..n)
                .map(|i| {
                    let av: T = a.row(i).iter().zip(vec).map(|(&x, &y)| x * y).sum();
                    (av - lam * vec[i]).powi(2)
                })
                .sum::<T>()
                .sqrt()
        })
        .fold(T::zero(), T::max)
}

/// `λ(A) = max(λ₂, -λₙ)` from a descending spectrum.
pub fn spectral_gap_lambda<T: Real>(values: &[T]) -> T {
    match values.len() {
        0 | 1 => T::zero(),
        n => values[1].max(-values[n - 1]),
    }
}

/// `2√(d(1 - d/n))`
pub fn vu_reference(n: usize, d: usize) -> f64 {
    2.0 * (d as f64 * (1.0 - d as f64 / n as f64)).max(0.0).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub n: usize,
    pub d: usize,
    pub eigenvalues: Vec<f64>,
    pub lambda: f64,
    pub vu_ref: f64,
    pub lambda_over_sqrt_d: Option<f64>,
    pub lambda_over_vu_ref: Option<f64>,
}

pub fn spectral_summary(a: &AdjacencyMatrix, d: usize) -> Result<SpectralSummary> {
    if !a.is_regular(d as u64) {
        return Err(Error::Precondition(format!("graph is not {d}-regular")));
    }
    let eigenvalues = eig_sym(&a.to_dense::<f64>())?;
    let n = a.n();
    let lambda = spectral_gap_lambda(&eigenvalues);
    let vu_ref = vu_reference(n, d);
    let ratio = |den: f64| (den > 0.0).then(|| lambda / den);
    Ok(SpectralSummary {
        n,
        d,
        eigenvalues,
        lambda,
        vu_ref,
        lambda_over_sqrt_d: ratio((d as f64).sqrt()),
        lambda_over_vu_ref: ratio(vu_ref),
    })
}

/// Full eigen-decomposition with the residual and trace checks; the Jacobi
/// comparison is included for `n <= 64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumVerification {
    pub tol: f64,
    pub max_residual: f64,
    pub trace_error: f64,
    pub jacobi_max_diff: Option<f64>,
    pub ok: bool,
}

pub fn verify_spectrum(a: &DenseMatrix<f64>) -> Result<SpectrumVerification> {
    let eig = eig_sym_vectors(a)?;
    let tol = residual_tol(a);
    let max_residual = max_residual(a, &eig);
    let trace: f64 = (0..a.n()).map(|i| a.get(i, i)).sum();
    let trace_error = (eig.values.iter().sum::<f64>() - trace).abs();
    let jacobi_max_diff = (a.n() <= JACOBI_MAX_N).then(|| {
        let jac = eig_jacobi(a).expect("already checked symmetric");
        jac.iter().zip(&eig.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    });
    let ok = max_residual <= tol && trace_error <= tol && jacobi_max_diff.map_or(true, |x| x <= tol.max(1e-9));
    Ok(SpectrumVerification { tol, max_residual, trace_error, jacobi_max_diff, ok })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    /// `max |e(S,T) - d|S||T|/n| / √(|S||T|)` over the sampled pairs.
    pub max_ratio: f64,
    pub lambda: f64,
    pub pairs: usize,
    pub ok: bool,
}

/// Expander mixing check on `trials` random pairs plus `([n],[n])` and all
/// singleton pairs.
pub fn mixing_check<R: Rng + ?Sized>(a: &AdjacencyMatrix, d: usize, trials: usize, rng: &mut R) -> Result<MixingReport> {
    let summary = spectral_summary(a, d)?;
    let n = a.n();
    let tol = 1e-9 * n as f64 * a.entries().iter().copied().max().unwrap_or(0) as f64;
    let deviation = |s: &[usize], t: &[bool], tlen: usize| -> f64 {
        let e: u64 = s
            .iter()
            .map(|&u| a.row(u).iter().zip(t).filter(|(_, &b)| b).map(|(&w, _)| w as u64).sum::<u64>())
            .sum();
        let expect = d as f64 * s.len() as f64 * tlen as f64 / n as f64;
        (e as f64 - expect).abs() / ((s.len() * tlen) as f64).sqrt()
    };
    let mut max_ratio: f64 = 0.0;
    let mut pairs = 0;
    let all: Vec<usize> = (0..n).collect();
    max_ratio = max_ratio.max(deviation(&all, &vec![true; n], n));
    pairs += 1;
    for u in 0..n {
        for v in 0..n {
            let mut t = vec![false; n];
            t[v] = true;
            max_ratio = max_ratio.max(deviation(&[u], &t, 1));
            pairs += 1;
        }
    }
    for _ in 0..trials {
        let ks = rng.random_range(1..=n);
        let kt = rng.random_range(1..=n);
        let s: Vec<usize> = sample_indices(rng, n, ks).into_vec();
        let mut t = vec![false; n];
        for v in sample_indices(rng, n, kt) {
            t[v] = true;
        }
        max_ratio = max_ratio.max(deviation(&s, &t, kt));
        pairs += 1;
    }
    Ok(MixingReport { max_ratio, lambda: summary.lambda, pairs, ok: max_ratio <= summary.lambda + tol })
}
