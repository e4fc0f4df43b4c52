//! Empirical tail probabilities with Clopper–Pearson limits, compared against
//! a bound curve.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::error::{invalid, Result};

/// One-sided confidence level used for every tail comparison.
pub const CONFIDENCE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailSide {
    /// `P[X - center >= t]`
    Upper,
    /// `P[X - center <= -t]`
    Lower,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    pub t: f64,
    pub bound: f64,
    pub lower_cl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub label: String,
    pub side: TailSide,
    pub center: f64,
    pub reps: u64,
    pub grid: Vec<f64>,
    pub empirical_ccdf: Vec<f64>,
    pub upper_cl: Vec<f64>,
    pub lower_cl: Vec<f64>,
    pub bound_curve: Vec<f64>,
    pub violations: Vec<Violation>,
}

impl TailReport {
    /// Tail report from i.i.d. samples. `bound(t)` is the theoretical bound
    /// at threshold `t`. The bound is violated at `t` when it is below the
    /// lower confidence limit.
    pub fn from_samples(
        label: impl Into<String>,
        side: TailSide,
        center: f64,
        samples: &[f64],
        grid: &[f64],
        bound: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        check_grid(grid)?;
        if samples.is_empty() {
            return Err(invalid("tail report needs at least one sample"));
        }
        let n = samples.len() as u64;
        let mut report = Self::empty(label, side, center, n, grid);
        for &t in grid {
            let k = samples
                .iter()
                .filter(|&&x| match side {
                    TailSide::Upper => x - center >= t,
                    TailSide::Lower => x - center <= -t,
                })
                .count() as u64;
            let (lo, hi) = clopper_pearson(k, n, CONFIDENCE);
            report.empirical_ccdf.push(k as f64 / n as f64);
            report.lower_cl.push(lo);
            report.upper_cl.push(hi);
            report.bound_curve.push(bound(t));
        }
        report.finish();
        Ok(report)
    }

    /// Tail report from an exactly computed law `P[X = x_i] = w_i`; the
    /// confidence limits coincide with the probabilities.
    pub fn from_exact(
        label: impl Into<String>,
        side: TailSide,
        center: f64,
        law: &[(f64, f64)],
        grid: &[f64],
        bound: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        check_grid(grid)?;
        let mut report = Self::empty(label, side, center, 0, grid);
        for &t in grid {
            let prob: f64 = law
                .iter()
                .filter(|(x, _)| match side {
                    TailSide::Upper => x - center >= t,
                    TailSide::Lower => x - center <= -t,
                })
                .map(|&(_, w)| w)
                .sum();
            let prob = prob.clamp(0.0, 1.0);
            report.empirical_ccdf.push(prob);
            // exact probabilities carry rounding error only
            report.lower_cl.push((prob - 1e-12).max(0.0));
            report.upper_cl.push((prob + 1e-12).min(1.0));
            report.bound_curve.push(bound(t));
        }
        report.finish();
        Ok(report)
    }

    fn empty(label: impl Into<String>, side: TailSide, center: f64, reps: u64, grid: &[f64]) -> Self {
        Self {
            label: label.into(),
            side,
            center,
            reps,
            grid: grid.to_vec(),
            empirical_ccdf: Vec::with_capacity(grid.len()),
            upper_cl: Vec::with_capacity(grid.len()),
            lower_cl: Vec::with_capacity(grid.len()),
            bound_curve: Vec::with_capacity(grid.len()),
            violations: Vec::new(),
        }
    }

    fn finish(&mut self) {
        self.violations = (0..self.grid.len())
            .filter(|&i| self.bound_curve[i] < self.lower_cl[i])
            .map(|i| Violation {
                index: i,
                t: self.grid[i],
                bound: self.bound_curve[i],
                lower_cl: self.lower_cl[i],
            })
            .collect();
    }

    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid("grid must be finite and nondecreasing"));
    }
    Ok(())
}

/// One-sided Clopper–Pearson limits `(lower, upper)` at level `conf` for `k`
/// successes in `n` trials; each side separately has coverage `conf`.
pub fn clopper_pearson(k: u64, n: u64, conf: f64) -> (f64, f64) {
    assert!(k <= n && n > 0);
    let alpha = 1.0 - conf;
    let (kf, nf) = (k as f64, n as f64);
    let lower = if k == 0 {
        0.0
    } else {
        Beta::new(kf, nf - kf + 1.0).expect("valid beta").inverse_cdf(alpha)
    };
    let upper = if k == n {
        1.0
    } else {
        Beta::new(kf + 1.0, nf - kf).expect("valid beta").inverse_cdf(1.0 - alpha)
    };
    (lower, upper)
}

/// Evenly spaced grid `[lo, hi]` with `count` points.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_edges_and_known_value() {
        assert_eq!(clopper_pearson(0, 10, 0.99).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.99).1, 1.0);
        // k = 0: upper limit solves (1-p)^n = alpha
        let (_, hi) = clopper_pearson(0, 100, 0.99);
        assert!((hi - (1.0 - 0.01f64.powf(0.01))).abs() < 1e-8);
        // k = n: lower limit solves p^n = alpha
        let (lo, _) = clopper_pearson(50, 50, 0.99);
        assert!((lo - 0.01f64.powf(1.0 / 50.0)).abs() < 1e-8);
        let (lo, hi) = clopper_pearson(30, 100, 0.99);
        assert!(lo < 0.3 && 0.3 < hi);
    }

    #[test]
    fn violations_flagged_only_below_lower_limit() {
        let samples: Vec<f64> = (0..1000).map(|i| (i % 10) as f64).collect();
        let grid = [0.0, 5.0, 9.0];
        let ok = TailReport::from_samples("u", TailSide::Upper, 0.0, &samples, &grid, |_| 1.0).unwrap();
        assert!(ok.holds());
        assert_eq!(ok.empirical_ccdf, vec![1.0, 0.5, 0.1]);
        let bad = TailReport::from_samples("u", TailSide::Upper, 0.0, &samples, &grid, |_| 0.05).unwrap();
        assert_eq!(bad.violations.iter().map(|v| v.index).collect::<Vec<_>>(), vec![0, 1, 2]);
        let low = TailReport::from_samples("l", TailSide::Lower, 9.0, &samples, &grid, |_| 1.0).unwrap();
        assert_eq!(low.empirical_ccdf, vec![1.0, 0.5, 0.1]);
        assert!(TailReport::from_samples("x", TailSide::Upper, 0.0, &samples, &[2.0, 1.0], |_| 1.0).is_err());
    }
}
