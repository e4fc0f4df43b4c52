//! Seeded, resumable experiment harness: sample graphs across a model grid,
//! record `λ(A)` per replica, and write a versioned CSV, a timings CSV, a
//! summary JSON and a cell-completion journal.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{invalid, Error, Result};
use crate::ks::{dp_check, dp_params, DpMode, DP_EXACT_MAX_N};
use crate::rng::RngStream;
use crate::samplers::GraphModel;
use crate::sizebias::{scenario, Scenario};
use crate::spectra::spectral_summary;
use crate::switchings::audit_switchings;
use crate::utp::utp_params;

pub const CSV_VERSION: &str = "# rrgap experiment csv v1";
pub const CSV_COLUMNS: [&str; 7] = ["model", "n", "d", "replica", "lambda", "lambda_over_sqrt_d", "lambda_over_vu_ref"];
pub const SEED_ENV: &str = "RRGAP_SEED";
pub const THREADS_ENV: &str = "RRGAP_THREADS";

const JOURNAL: &str = "journal.jsonl";
const SWITCHING_AUDIT_MAX_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    Spectrum,
    Tails,
    Switchings,
    Dp,
}

/// Cartesian grid of cells for one model. Degrees come from `d` and, when
/// given, `⌈n^{d_power}⌉`; `p` is used for `er`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub model: String,
    pub n: Vec<usize>,
    #[serde(default)]
    pub d: Vec<usize>,
    #[serde(default)]
    pub d_power: Option<f64>,
    #[serde(default)]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub models: Vec<GraphModel>,
    #[serde(default)]
    pub grids: Vec<GridSpec>,
    pub replicas: u64,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default = "default_validations")]
    pub validations: Vec<Validation>,
    /// Replicas with `λ(A) > factor·√d` count as violations.
    #[serde(default)]
    pub lambda_bound_factor: Option<f64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn default_validations() -> Vec<Validation> {
    vec![Validation::Spectrum]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(invalid("replicas must be >= 1"));
        }
        Ok(())
    }

    /// Applies `RRGAP_SEED` and `RRGAP_THREADS`.
    pub fn with_env_overrides(mut self) -> Result<Self> {
        if let Ok(s) = std::env::var(SEED_ENV) {
            self.seed = s.trim().parse().map_err(|_| invalid(format!("{SEED_ENV} is not an integer: {s}")))?;
        }
        if let Ok(s) = std::env::var(THREADS_ENV) {
            self.threads = Some(s.trim().parse().map_err(|_| invalid(format!("{THREADS_ENV} is not an integer: {s}")))?);
        }
        Ok(self)
    }

    /// All cells in order, each either a model or the reason it was skipped.
    pub fn cells(&self) -> Vec<std::result::Result<GraphModel, SkippedCell>> {
        let mut out: Vec<std::result::Result<GraphModel, SkippedCell>> =
            self.models.iter().map(|m| m.validate().map(|_| *m).map_err(|e| skipped(m.name(), m.n(), m.d(), e))).collect();
        for g in &self.grids {
            for &n in &g.n {
                let mut ds = g.d.clone();
                if let Some(pw) = g.d_power {
                    ds.push((n as f64).powf(pw).ceil() as usize);
                }
                if g.model == "er" {
                    ds = vec![0];
                }
                for d in ds {
                    out.push(
                        GraphModel::from_name(&g.model, n, d, g.p)
                            .and_then(|m| m.validate().map(|_| m))
                            .map_err(|e| skipped(&g.model, n, Some(d), e)),
                    );
                }
            }
        }
        out
    }
}

fn skipped(model: &str, n: usize, d: Option<usize>, e: Error) -> SkippedCell {
    SkippedCell { model: model.to_string(), n, d, reason: e.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub model: String,
    pub n: usize,
    pub d: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaRow {
    pub replica: u64,
    pub lambda: f64,
    pub lambda_over_sqrt_d: Option<f64>,
    pub lambda_over_vu_ref: Option<f64>,
    pub dp_holds: Option<bool>,
    pub runtime_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub index: usize,
    pub model: GraphModel,
    pub rows: Vec<ReplicaRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub mean: f64,
}

impl Quantiles {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut data = Data::new(values.to_vec());
        Some(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            q05: data.quantile(0.05),
            q25: data.quantile(0.25),
            median: data.median(),
            q75: data.quantile(0.75),
            q95: data.quantile(0.95),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: values.iter().sum::<f64>() / values.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub model: String,
    pub n: usize,
    pub d: Option<usize>,
    pub replicas: usize,
    pub lambda: Option<Quantiles>,
    pub lambda_over_sqrt_d: Option<Quantiles>,
    pub lambda_over_vu_ref: Option<Quantiles>,
    pub dp_fail_fraction: Option<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationSummary {
    pub name: String,
    pub detail: serde_json::Value,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub seed: u64,
    pub replicas: u64,
    pub cells: Vec<CellSummary>,
    pub skipped: Vec<SkippedCell>,
    pub validations: Vec<ValidationSummary>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub csv: PathBuf,
    pub timings: PathBuf,
    pub summary_path: PathBuf,
    pub summary: ExperimentSummary,
    /// Cells computed in this run (the rest came from the journal).
    pub computed_cells: usize,
}

fn run_replica(model: &GraphModel, stream: RngStream, with_dp: bool) -> Result<ReplicaRow> {
    let start = Instant::now();
    let mut rng = stream.rng();
    let a = model.sample(&mut rng)?;
    let d = model.d().unwrap_or(0);
    let (lambda, over_sqrt, over_vu) = if model.d().is_some() {
        let s = spectral_summary(&a, d)?;
        (s.lambda, s.lambda_over_sqrt_d, s.lambda_over_vu_ref)
    } else {
        let vals = crate::spectra::eig_sym(&a.to_dense::<f64>())?;
        (crate::spectra::spectral_gap_lambda(&vals), None, None)
    };
    let dp_holds = if with_dp { dp_for(model, &a, stream)? } else { None };
    Ok(ReplicaRow {
        replica: stream.stream_index,
        lambda,
        lambda_over_sqrt_d: over_sqrt,
        lambda_over_vu_ref: over_vu,
        dp_holds,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Discrepancy property with `δ = 2d/n` and `(κ1, κ2)` from the model's
/// tail parameters at `K = 1`.
fn dp_for(model: &GraphModel, a: &crate::AdjacencyMatrix, stream: RngStream) -> Result<Option<bool>> {
    let Ok(utp) = utp_params::<f64>(model) else { return Ok(None) };
    let (n, d) = (model.n(), model.d().unwrap_or(0));
    let delta = 2.0 * d as f64 / n as f64;
    let Ok(params) = dp_params(utp.c0, utp.gamma0, 1.0).and_then(|k| k.with_delta(delta)) else { return Ok(None) };
    let mode = if n <= DP_EXACT_MAX_N { DpMode::Exact } else { DpMode::Sampled { seed: stream.derived(1).seed.wrapping_add(stream.stream_index) } };
    Ok(Some(dp_check(a, &params, mode)?.holds))
}

#[derive(Serialize, Deserialize)]
struct JournalHeader {
    config: ExperimentConfig,
}

fn read_journal(path: &Path, cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let Ok(file) = File::open(path) else { return Ok(Vec::new()) };
    let mut lines = BufReader::new(file).lines();
    let Some(Ok(first)) = lines.next() else { return Ok(Vec::new()) };
    let Ok(header) = serde_json::from_str::<JournalHeader>(&first) else { return Ok(Vec::new()) };
    if header.config != *cfg {
        return Ok(Vec::new());
    }
    let mut cells = Vec::new();
    for line in lines {
        let line = line?;
        // a torn final line from an interrupted run is dropped
        match serde_json::from_str::<CellResult>(&line) {
            Ok(c) => cells.push(c),
            Err(_) => break,
        }
    }
    Ok(cells)
}

/// Config identity used for resumption; thread count and output location
/// do not change results.
fn journal_key(cfg: &ExperimentConfig) -> ExperimentConfig {
    ExperimentConfig { threads: None, output_dir: PathBuf::new(), ..cfg.clone() }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| invalid(e.to_string()))?
            .install(|| run_inner(cfg)),
        None => run_inner(cfg),
    }
}

fn run_inner(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    fs::create_dir_all(&cfg.output_dir)?;
    let key = journal_key(cfg);
    let journal_path = cfg.output_dir.join(JOURNAL);
    let mut done = read_journal(&journal_path, &key)?;
    if done.is_empty() {
        let mut f = File::create(&journal_path)?;
        writeln!(f, "{}", serde_json::to_string(&JournalHeader { config: key.clone() })?)?;
    } else {
        // rewrite the journal without any torn line
        let mut f = File::create(&journal_path)?;
        writeln!(f, "{}", serde_json::to_string(&JournalHeader { config: key.clone() })?)?;
        for c in &done {
            writeln!(f, "{}", serde_json::to_string(c)?)?;
        }
    }
    let cells = cfg.cells();
    let with_dp = cfg.validations.contains(&Validation::Dp);
    let mut computed = 0;
    for (index, cell) in cells.iter().enumerate() {
        let Ok(model) = cell else { continue };
        if done.iter().any(|c| c.index == index) {
            continue;
        }
        let base = index as u64 * cfg.replicas;
        let rows = (0..cfg.replicas)
            .into_par_iter()
            .map(|r| {
                run_replica(model, RngStream::new(cfg.seed, base + r), with_dp).map(|row| ReplicaRow { replica: r, ..row })
            })
            .collect::<Result<Vec<_>>>()?;
        let result = CellResult { index, model: *model, rows };
        let mut f = OpenOptions::new().append(true).open(&journal_path)?;
        writeln!(f, "{}", serde_json::to_string(&result)?)?;
        done.push(result);
        computed += 1;
    }
    done.sort_by_key(|c| c.index);
    let lambda_violations = |c: &CellResult| match (cfg.lambda_bound_factor, c.model.d()) {
        (Some(f), Some(d)) => c.rows.iter().filter(|r| r.lambda > f * (d as f64).sqrt()).count(),
        _ => 0,
    };

    let csv_path = cfg.output_dir.join("results.csv");
    write_results_csv(&csv_path, &done)?;
    let timings_path = cfg.output_dir.join("timings.csv");
    write_timings_csv(&timings_path, &done)?;

    let mut summary = ExperimentSummary {
        seed: cfg.seed,
        replicas: cfg.replicas,
        cells: done.iter().map(|c| summarize(c, lambda_violations(c))).collect(),
        skipped: cells.into_iter().filter_map(|c| c.err()).collect(),
        validations: run_validations(cfg, &done)?,
        violations: 0,
    };
    summary.violations = summary.cells.iter().map(|c| c.violations).sum::<usize>()
        + summary.validations.iter().map(|v| v.violations).sum::<usize>();
    let summary_path = cfg.output_dir.join("summary.json");
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(ExperimentOutcome { csv: csv_path, timings: timings_path, summary_path, summary, computed_cells: computed })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn write_results_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut out = File::create(path)?;
    writeln!(out, "{CSV_VERSION}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for c in cells {
        for r in &c.rows {
            w.write_record([
                c.model.name().to_string(),
                c.model.n().to_string(),
                c.model.d().map(|d| d.to_string()).unwrap_or_default(),
                r.replica.to_string(),
                r.lambda.to_string(),
                fmt_opt(r.lambda_over_sqrt_d),
                fmt_opt(r.lambda_over_vu_ref),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_timings_csv(path: &Path, cells: &[CellResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["model", "n", "d", "replica", "runtime_ms"]).map_err(csv_err)?;
    for c in cells {
        for r in &c.rows {
            w.write_record([
                c.model.name().to_string(),
                c.model.n().to_string(),
                c.model.d().map(|d| d.to_string()).unwrap_or_default(),
                r.replica.to_string(),
                format!("{:.3}", r.runtime_ms),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn summarize(c: &CellResult, violations: usize) -> CellSummary {
    let col = |f: fn(&ReplicaRow) -> Option<f64>| -> Option<Quantiles> {
        let v: Vec<f64> = c.rows.iter().filter_map(f).collect();
        Quantiles::of(&v)
    };
    let dp: Vec<bool> = c.rows.iter().filter_map(|r| r.dp_holds).collect();
    CellSummary {
        model: c.model.name().to_string(),
        n: c.model.n(),
        d: c.model.d(),
        replicas: c.rows.len(),
        lambda: col(|r| Some(r.lambda)),
        lambda_over_sqrt_d: col(|r| r.lambda_over_sqrt_d),
        lambda_over_vu_ref: col(|r| r.lambda_over_vu_ref),
        dp_fail_fraction: (!dp.is_empty()).then(|| dp.iter().filter(|&&h| !h).count() as f64 / dp.len() as f64),
        violations,
    }
}

fn run_validations(cfg: &ExperimentConfig, cells: &[CellResult]) -> Result<Vec<ValidationSummary>> {
    let mut out = Vec::new();
    if cfg.validations.contains(&Validation::Tails) {
        for name in Scenario::NAMES {
            let sc = Scenario::from_name(name)?;
            let report = scenario(&sc, cfg.replicas, cfg.seed, None)?;
            out.push(ValidationSummary {
                name: format!("tails/{name}"),
                violations: report.violations(),
                detail: serde_json::to_value(&report)?,
            });
        }
    }
    if cfg.validations.contains(&Validation::Switchings) {
        let mut seen = Vec::new();
        for c in cells {
            if let GraphModel::UniformSimple { n, d } = c.model {
                if n <= SWITCHING_AUDIT_MAX_N && !seen.contains(&(n, d)) {
                    seen.push((n, d));
                    let audit = audit_switchings(n, d)?;
                    out.push(ValidationSummary {
                        name: format!("switchings/{n}/{d}"),
                        violations: usize::from(!audit.ok()),
                        detail: serde_json::to_value(&audit)?,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Rows of a results CSV written by [`run_experiment`].
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub model: String,
    pub n: usize,
    pub d: Option<usize>,
    pub replica: u64,
    pub lambda: f64,
    pub lambda_over_sqrt_d: Option<f64>,
    pub lambda_over_vu_ref: Option<f64>,
}

pub fn read_results_csv(text: &str) -> Result<Vec<CsvRow>> {
    if !text.starts_with(CSV_VERSION) {
        return Err(Error::Parse { line: 1, msg: format!("missing version header `{CSV_VERSION}`") });
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = r.headers().map_err(csv_err)?.clone();
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(Error::Parse { line: 2, msg: "unexpected columns".into() });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = |msg: &str| Error::Parse { line: i + 3, msg: msg.to_string() };
        let num = |k: usize| -> Result<f64> { rec[k].parse().map_err(|_| bad("bad number")) };
        let opt = |k: usize| -> Result<Option<f64>> {
            if rec[k].is_empty() {
                Ok(None)
            } else {
                num(k).map(Some)
            }
        };
        rows.push(CsvRow {
            model: rec[0].to_string(),
            n: rec[1].parse().map_err(|_| bad("bad n"))?,
            d: if rec[2].is_empty() { None } else { Some(rec[2].parse().map_err(|_| bad("bad d"))?) },
            replica: rec[3].parse().map_err(|_| bad("bad replica"))?,
            lambda: num(4)?,
            lambda_over_sqrt_d: opt(5)?,
            lambda_over_vu_ref: opt(6)?,
        });
    }
    Ok(rows)
}
