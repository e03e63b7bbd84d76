//! Seeded batch experiments: grid execution, aggregation, plot data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::{run_adam_static, AdamConfig};
use crate::ensemble::{run_until_consensus, Ensemble};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::params::{Beta, CboParams, NoiseMode};
use crate::rng::{split_seed, RngHandle};
use crate::theory::lambda_rate;

/// Which experiment a config drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    StaticBench,
    Portfolio,
    Theory,
}

/// Batch configuration. The grid is the cross of the plain-CBO sigma
/// values, the average-drift lambda1 values (run noise-free), and
/// optionally the Adam variant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    /// Plain-CBO noise grid.
    pub sigma_grid: Vec<f64>,
    /// Average-drift grid, run with sigma = 0.
    pub lambda1_grid: Vec<f64>,
    pub include_adam: bool,
    pub base: CboParams,
    pub replications: usize,
    pub master_seed: u64,
    /// Uniform initialization box `[lo, hi]^d`.
    pub init_lo: f64,
    pub init_hi: f64,
    /// Rolling window for the portfolio experiment.
    pub window_len: usize,
}

impl Default for ExperimentConfig {
    /// Benchmark defaults: d = 15, N = 50, U[2,4] initialization, the
    /// sigma and lambda1 grids of the static study, 50 replications.
    fn default() -> Self {
        ExperimentConfig {
            experiment: ExperimentKind::StaticBench,
            sigma_grid: vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0],
            lambda1_grid: vec![1.0, 2.0, 3.0, 4.0, 5.0],
            include_adam: false,
            base: CboParams::default(),
            replications: 50,
            master_seed: 0,
            init_lo: 2.0,
            init_hi: 4.0,
            window_len: 60,
        }
    }
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Input(format!("expected a boolean, got '{other}'"))),
    }
}

fn parse_list(v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|e| Error::Input(format!("bad number '{s}': {e}")))
        })
        .collect()
}

impl ExperimentConfig {
    /// Parse a `key = value` configuration file whose keys mirror the
    /// struct fields (grids as comma lists, `beta = inf` allowed).
    /// Unknown keys are rejected; missing keys keep their defaults.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut config = ExperimentConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Input(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            config.set(key.trim(), value.trim())?;
        }
        Ok(config)
    }

    /// Apply one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |e: std::num::ParseFloatError| Error::Input(format!("{key}: {e}"));
        let bad_int = |e: std::num::ParseIntError| Error::Input(format!("{key}: {e}"));
        match key {
            "experiment" => {
                self.experiment = match value {
                    "static-bench" => ExperimentKind::StaticBench,
                    "portfolio" => ExperimentKind::Portfolio,
                    "theory" => ExperimentKind::Theory,
                    other => return Err(Error::Input(format!("unknown experiment '{other}'"))),
                }
            }
            "sigma_grid" => self.sigma_grid = parse_list(value)?,
            "lambda1_grid" => self.lambda1_grid = parse_list(value)?,
            "include_adam" => self.include_adam = parse_bool(value)?,
            "replications" => self.replications = value.parse().map_err(bad_int)?,
            "master_seed" => self.master_seed = value.parse().map_err(bad_int)?,
            "init_lo" => self.init_lo = value.parse().map_err(bad)?,
            "init_hi" => self.init_hi = value.parse().map_err(bad)?,
            "window_len" => self.window_len = value.parse().map_err(bad_int)?,
            "lambda0" => self.base.lambda0 = value.parse().map_err(bad)?,
            "lambda1" => self.base.lambda1 = value.parse().map_err(bad)?,
            "sigma" => self.base.sigma = value.parse().map_err(bad)?,
            "h" => self.base.h = value.parse().map_err(bad)?,
            "beta" => {
                self.base.beta = if value == "inf" {
                    Beta::Infinity
                } else {
                    Beta::Finite(value.parse().map_err(bad)?)
                }
            }
            "n_particles" => self.base.n_particles = value.parse().map_err(bad_int)?,
            "dim" => self.base.dim = value.parse().map_err(bad_int)?,
            "eps_tol" => self.base.eps_tol = value.parse().map_err(bad)?,
            "max_iters" => self.base.max_iters = value.parse().map_err(bad_int)?,
            "noise" => {
                self.base.noise = match value {
                    "common" => NoiseMode::Common,
                    "independent" => NoiseMode::Independent,
                    other => return Err(Error::Input(format!("unknown noise mode '{other}'"))),
                }
            }
            other => return Err(Error::Input(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }
}

/// One grid cell of the static benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub label: String,
    pub sigma: f64,
    pub lambda1: f64,
    pub adam: bool,
}

/// Outcome of one seeded replication.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub cell: String,
    pub seed: u64,
    pub final_objective: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub failure: Option<String>,
}

impl RunRecord {
    pub fn succeeded(&self) -> bool {
        self.failure.is_none()
    }
}

/// Per-cell mean/variance (denominator runs - 1) of the final objective
/// and the iteration count, over successful replications.
#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub cell: GridCell,
    pub n_ok: usize,
    pub n_failed: usize,
    pub mean_objective: f64,
    pub var_objective: f64,
    pub mean_iterations: f64,
    pub var_iterations: f64,
    pub failures: Vec<String>,
}

/// The whole batch: one block per grid cell plus the raw records.
#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub cells: Vec<CellSummary>,
    pub records: Vec<RunRecord>,
}

impl BatchSummary {
    pub fn all_succeeded(&self) -> bool {
        self.records.iter().all(RunRecord::succeeded)
    }
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Collapse per-run records into per-cell statistics. Input order does
/// not matter: records are grouped and sorted by (cell, seed) first.
pub fn aggregate(cells: &[GridCell], records: Vec<RunRecord>) -> Result<BatchSummary> {
    if records.is_empty() {
        return Err(Error::Input("no records to aggregate".into()));
    }
    let mut records = records;
    records.sort_by(|a, b| (&a.cell, a.seed).cmp(&(&b.cell, b.seed)));
    let mut summaries = Vec::with_capacity(cells.len());
    for cell in cells {
        let cell_records: Vec<&RunRecord> =
            records.iter().filter(|r| r.cell == cell.label).collect();
        let ok: Vec<&&RunRecord> = cell_records.iter().filter(|r| r.succeeded()).collect();
        let objectives: Vec<f64> = ok.iter().filter_map(|r| r.final_objective).collect();
        let iterations: Vec<f64> = ok.iter().filter_map(|r| r.iterations.map(|i| i as f64)).collect();
        let (mean_objective, var_objective) = mean_var(&objectives);
        let (mean_iterations, var_iterations) = mean_var(&iterations);
        summaries.push(CellSummary {
            cell: cell.clone(),
            n_ok: ok.len(),
            n_failed: cell_records.len() - ok.len(),
            mean_objective,
            var_objective,
            mean_iterations,
            var_iterations,
            failures: cell_records
                .iter()
                .filter_map(|r| r.failure.clone())
                .collect(),
        });
    }
    Ok(BatchSummary {
        cells: summaries,
        records,
    })
}

/// The benchmark grid implied by a config: plain CBO per sigma, the
/// noise-free average-drift variant per lambda1, optionally Adam.
pub fn benchmark_grid(config: &ExperimentConfig) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &sigma in &config.sigma_grid {
        cells.push(GridCell {
            label: format!("cbo_sigma_{sigma}"),
            sigma,
            lambda1: 0.0,
            adam: false,
        });
    }
    for &lambda1 in &config.lambda1_grid {
        cells.push(GridCell {
            label: format!("adcbo_lambda1_{lambda1}"),
            sigma: 0.0,
            lambda1,
            adam: false,
        });
    }
    if config.include_adam {
        cells.push(GridCell {
            label: "adam".into(),
            sigma: 0.0,
            lambda1: 0.0,
            adam: true,
        });
    }
    cells
}

fn run_one(
    config: &ExperimentConfig,
    cell: &GridCell,
    seed: u64,
    objective: &dyn Objective,
) -> RunRecord {
    let mut record = RunRecord {
        cell: cell.label.clone(),
        seed,
        final_objective: None,
        iterations: None,
        converged: None,
        failure: None,
    };
    let mut rng = RngHandle::new(seed);
    let params = CboParams {
        sigma: cell.sigma,
        lambda1: cell.lambda1,
        ..config.base.clone()
    };
    let outcome = Ensemble::uniform_init(
        params.n_particles,
        params.dim,
        config.init_lo,
        config.init_hi,
        &mut rng,
    )
    .and_then(|ensemble| {
        if cell.adam {
            let adam = AdamConfig::new(params.h, params.lambda0, params.beta);
            run_adam_static(ensemble, &adam, params.eps_tol, params.max_iters, objective)
        } else {
            run_until_consensus(ensemble, &params, objective, &mut rng)
        }
    });
    match outcome {
        Ok(result) => {
            record.final_objective = Some(result.objective_at_consensus);
            record.iterations = Some(result.iterations);
            record.converged = Some(result.converged);
        }
        Err(e) => record.failure = Some(e.to_string()),
    }
    record
}

/// Run the full static benchmark grid, `config.replications` seeded runs
/// per cell, in parallel. A failing replication is recorded, never
/// aborts the batch. Replication seeds come from the documented split of
/// the master seed, so the batch is reproducible regardless of thread
/// scheduling.
pub fn run_static_bench(config: &ExperimentConfig, objective: &dyn Objective) -> Result<BatchSummary> {
    if config.replications == 0 {
        return Err(Error::Input("need at least one replication".into()));
    }
    let cells = benchmark_grid(config);
    if cells.is_empty() {
        return Err(Error::Input("empty benchmark grid".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..cells.len())
        .flat_map(|c| {
            (0..config.replications)
                .map(move |r| (c, (c * config.replications + r) as u64))
        })
        .collect();
    let records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(cell_idx, job_idx)| {
            let seed = split_seed(config.master_seed, job_idx);
            run_one(config, &cells[cell_idx], seed, objective)
        })
        .collect();
    aggregate(&cells, records)
}

/// Round to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(digits - 1 - magnitude);
    (x * factor).round() / factor
}

fn round_json(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    if let Some(rounded) = serde_json::Number::from_f64(round_sig(f, 6)) {
                        *n = rounded;
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json),
        _ => {}
    }
}

/// Serialize to pretty JSON with floats rounded to 6 significant digits
/// (integers untouched). Byte-identical for identical input.
pub fn to_json_6sig<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value)
        .map_err(|e| Error::Numerical(format!("serialization failed: {e}")))?;
    round_json(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| Error::Numerical(format!("{e}")))
}

/// Plot data: the log-Lyapunov rate over a sigma sweep,
/// `sigma,lambda_rate` per row, full precision.
pub fn write_lambda_sweep_csv<W: std::io::Write>(
    lambda0: f64,
    h: f64,
    sigmas: &[f64],
    out: &mut W,
) -> Result<()> {
    writeln!(out, "sigma,lambda_rate")?;
    for &sigma in sigmas {
        writeln!(out, "{sigma},{}", lambda_rate(sigma, lambda0, h)?)?;
    }
    Ok(())
}

/// Inclusive sweep grid `[lo, lo+step, ...] <= hi + step/2`.
pub fn sweep_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0;
    loop {
        let v = lo + step * k as f64;
        if v > hi + step / 2.0 {
            break;
        }
        out.push(v);
        k += 1;
    }
    out
}

/// Plot data: per-cell mean and standard deviation of the final
/// objective and iteration count (confidence-interval figure analog).
pub fn write_confidence_csv<W: std::io::Write>(
    summary: &BatchSummary,
    out: &mut W,
) -> Result<()> {
    writeln!(
        out,
        "cell,mean_objective,sd_objective,mean_iterations,sd_iterations"
    )?;
    for cell in &summary.cells {
        writeln!(
            out,
            "{},{},{},{},{}",
            cell.cell.label,
            cell.mean_objective,
            cell.var_objective.sqrt(),
            cell.mean_iterations,
            cell.var_iterations.sqrt()
        )?;
    }
    Ok(())
}

/// Plot data: step-indexed wealth (or return) curves, one named column
/// per algorithm.
pub fn write_curves_csv<W: std::io::Write>(
    names: &[&str],
    curves: &[Vec<f64>],
    out: &mut W,
) -> Result<()> {
    if names.len() != curves.len() || curves.is_empty() {
        return Err(Error::Input("need one name per curve".into()));
    }
    let len = curves[0].len();
    if curves.iter().any(|c| c.len() != len) {
        return Err(Error::Input("curves must share a length".into()));
    }
    writeln!(out, "step,{}", names.join(","))?;
    for step in 0..len {
        write!(out, "{step}")?;
        for curve in curves {
            write!(out, ",{}", curve[step])?;
        }
        writeln!(out)?;
    }
    Ok(())
}
