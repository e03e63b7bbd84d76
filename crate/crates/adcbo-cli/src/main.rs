//! Experiment driver: static benchmark, portfolio loop, theory
//! diagnostics, and regret analysis from one binary.
//!
//! Exit code is 0 only when every requested replication succeeded.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use adcbo::harness::{
    run_static_bench, sweep_grid, to_json_6sig, write_confidence_csv, write_curves_csv,
    write_lambda_sweep_csv, ExperimentConfig,
};
use adcbo::objective::Rastrigin;
use adcbo::portfolio::{
    benchmark_return_curve, hindsight_crp, ingest_prices, mean_best_return_curve,
    pearson_correlation, regret, returns, rolling_stats, run_ops, run_statistics,
    synthesize_prices, OpsAlgorithm, OpsRun, ReturnSeries, SynthSpec,
};
use adcbo::rng::split_seed;
use adcbo::theory::check_admissibility;
use adcbo::{Beta, CboParams, RngHandle};

#[derive(Parser)]
#[command(name = "adcbo", about = "Consensus-based optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Seeded benchmark grid on the Rastrigin objective
    StaticBench(StaticBenchArgs),
    /// Online portfolio selection over rolling Sharpe windows
    Portfolio(PortfolioArgs),
    /// Closed-form stability diagnostics and the Lambda(sigma) sweep
    Theory(TheoryArgs),
    /// Regret report of one trading run against the hindsight benchmark
    Regret(RegretArgs),
}

#[derive(Args)]
struct StaticBenchArgs {
    /// Key-value config file; keys mirror the experiment config fields
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. --set sigma_grid=0,1,2
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed (config key master_seed)
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per grid cell (config key replications)
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    Cbo,
    AdCbo,
    AdamCbo,
}

impl From<AlgoArg> for OpsAlgorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::Cbo => OpsAlgorithm::Cbo,
            AlgoArg::AdCbo => OpsAlgorithm::AdCbo,
            AlgoArg::AdamCbo => OpsAlgorithm::AdamCbo,
        }
    }
}

#[derive(Args)]
struct DataArgs {
    /// Price CSV with header date,TICKER1,...,TICKERd
    #[arg(long, conflicts_with = "synthetic")]
    prices: Option<PathBuf>,
    /// Synthetic series spec, e.g. "d=5,t=752" (seed defaults to --seed)
    #[arg(long)]
    synthetic: Option<String>,
}

#[derive(Args)]
struct PortfolioArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "ad-cbo")]
    algo: AlgoArg,
    #[arg(long, default_value_t = 1.0)]
    lambda0: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    /// Inverse temperature; "inf" selects the best particle outright
    #[arg(long, default_value = "10")]
    beta: String,
    #[arg(long, default_value_t = 20)]
    particles: usize,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    window: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TheoryArgs {
    #[arg(long, default_value_t = 1.0)]
    lambda0: f64,
    #[arg(long, default_value_t = 0.1)]
    h: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Gaussian initialization spreads for the constants, comma list
    #[arg(long, default_value = "1")]
    spreads: String,
    #[arg(long, default_value_t = 50)]
    particles: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct RegretArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "ad-cbo")]
    algo: AlgoArg,
    #[arg(long, default_value_t = 1.0)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 20)]
    particles: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 60)]
    window: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn parse_beta(text: &str) -> Result<Beta, String> {
    if text == "inf" {
        return Ok(Beta::Infinity);
    }
    text.parse()
        .map(Beta::Finite)
        .map_err(|e| format!("bad beta '{text}': {e}"))
}

fn parse_synthetic(text: &str, default_seed: u64) -> Result<SynthSpec, String> {
    let mut d = 5usize;
    let mut t = 752usize;
    let mut seed = default_seed;
    for part in text.split(',') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| format!("bad synthetic spec part '{part}'"))?;
        match key.trim() {
            "d" => d = value.trim().parse().map_err(|e| format!("d: {e}"))?,
            "t" => t = value.trim().parse().map_err(|e| format!("t: {e}"))?,
            "seed" => seed = value.trim().parse().map_err(|e| format!("seed: {e}"))?,
            other => return Err(format!("unknown synthetic key '{other}'")),
        }
    }
    Ok(SynthSpec::default_three_year(d, seed).with_rows(t))
}

trait WithRows {
    fn with_rows(self, t: usize) -> Self;
}

impl WithRows for SynthSpec {
    fn with_rows(mut self, t: usize) -> Self {
        self.t = t;
        self
    }
}

fn load_returns(data: &DataArgs, seed: u64) -> Result<ReturnSeries, String> {
    let prices = if let Some(path) = &data.prices {
        let file = fs::File::open(path).map_err(|e| format!("{}: {e}", path.display()))?;
        ingest_prices(BufReader::new(file)).map_err(|e| e.to_string())?
    } else {
        let spec = parse_synthetic(data.synthetic.as_deref().unwrap_or("d=5,t=752"), seed)?;
        synthesize_prices(&spec).map_err(|e| e.to_string())?
    };
    returns(&prices).map_err(|e| e.to_string())
}

fn write(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

fn run_static(args: &StaticBenchArgs) -> Result<bool, String> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            ExperimentConfig::from_key_values(&text).map_err(|e| e.to_string())?
        }
        None => ExperimentConfig::default(),
    };
    for set in &args.sets {
        let (key, value) = set
            .split_once('=')
            .ok_or_else(|| format!("--set expects KEY=VALUE, got '{set}'"))?;
        config.set(key.trim(), value.trim()).map_err(|e| e.to_string())?;
    }
    if let Some(seed) = args.seed {
        config.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        config.replications = runs;
    }
    let objective = Rastrigin {
        dim: config.base.dim,
    };
    let summary = run_static_bench(&config, &objective).map_err(|e| e.to_string())?;
    fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    write(
        &args.out.join("static_bench.json"),
        &to_json_6sig(&summary).map_err(|e| e.to_string())?,
    )?;
    let mut confidence = Vec::new();
    write_confidence_csv(&summary, &mut confidence).map_err(|e| e.to_string())?;
    write(
        &args.out.join("confidence.csv"),
        &String::from_utf8(confidence).unwrap(),
    )?;
    // raw records at full precision
    let mut raw = String::from("cell,seed,final_objective,iterations,converged,failure\n");
    for r in &summary.records {
        raw.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.cell,
            r.seed,
            r.final_objective.map_or(String::new(), |v| v.to_string()),
            r.iterations.map_or(String::new(), |v| v.to_string()),
            r.converged.map_or(String::new(), |v| v.to_string()),
            r.failure.clone().unwrap_or_default()
        ));
    }
    write(&args.out.join("records.csv"), &raw)?;
    for cell in &summary.cells {
        println!(
            "{}: mean L = {:.6}, var L = {:.6}, mean iters = {:.1}, var iters = {:.3}, failed {}",
            cell.cell.label,
            cell.mean_objective,
            cell.var_objective,
            cell.mean_iterations,
            cell.var_iterations,
            cell.n_failed
        );
    }
    Ok(summary.all_succeeded())
}

fn run_portfolio(args: &PortfolioArgs) -> Result<bool, String> {
    let beta = parse_beta(&args.beta)?;
    let rs = load_returns(&args.data, args.seed)?;
    let stats = rolling_stats(&rs, args.window).map_err(|e| e.to_string())?;
    let params = CboParams {
        lambda0: args.lambda0,
        lambda1: args.lambda1,
        sigma: args.sigma,
        h: args.h,
        beta,
        n_particles: args.particles,
        dim: rs.n_assets(),
        ..CboParams::default()
    };
    let algorithm: OpsAlgorithm = args.algo.into();
    let outcomes: Vec<Result<OpsRun, String>> = (0..args.runs)
        .into_par_iter()
        .map(|rep| {
            let mut rng = RngHandle::new(split_seed(args.seed, rep as u64));
            run_ops(&rs, &stats, &params, algorithm, &mut rng).map_err(|e| e.to_string())
        })
        .collect();
    let failures: Vec<&String> = outcomes.iter().filter_map(|o| o.as_ref().err()).collect();
    for f in &failures {
        eprintln!("replication failed: {f}");
    }
    let runs: Vec<OpsRun> = outcomes.iter().filter_map(|o| o.as_ref().ok().cloned()).collect();
    if runs.is_empty() {
        return Err("every replication failed".into());
    }
    let summary = run_statistics(&runs).map_err(|e| e.to_string())?;

    // hindsight benchmark on the realized rows and regret of run 0
    let realized = ReturnSeries::from_rows(
        rs.n_assets(),
        (args.window..rs.n_rows())
            .flat_map(|n| rs.row(n).to_vec())
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let (sharp, sharp_value) = hindsight_crp(&realized).map_err(|e| e.to_string())?;
    let report = regret(&runs[0], &rs, &sharp).map_err(|e| e.to_string())?;

    fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    write(
        &args.out.join("portfolio_summary.json"),
        &to_json_6sig(&summary).map_err(|e| e.to_string())?,
    )?;
    write(
        &args.out.join("regret.json"),
        &to_json_6sig(&report).map_err(|e| e.to_string())?,
    )?;
    // wealth curves of run 0 plus the across-run mean best-return curve
    let mean_best = mean_best_return_curve(&runs).map_err(|e| e.to_string())?;
    let benchmark = benchmark_return_curve(&rs, args.window, &sharp).map_err(|e| e.to_string())?;
    let mut curves = Vec::new();
    write_curves_csv(
        &["wealth_mean", "wealth_best"],
        &[runs[0].wealth_mean.clone(), runs[0].wealth_best.clone()],
        &mut curves,
    )
    .map_err(|e| e.to_string())?;
    write(&args.out.join("wealth.csv"), &String::from_utf8(curves).unwrap())?;
    let mut ret_curves = Vec::new();
    write_curves_csv(
        &["mean_best_return", "benchmark_return"],
        &[mean_best.clone(), benchmark.clone()],
        &mut ret_curves,
    )
    .map_err(|e| e.to_string())?;
    write(
        &args.out.join("returns.csv"),
        &String::from_utf8(ret_curves).unwrap(),
    )?;

    println!(
        "runs {}, mean best L = {:.6}, var best L = {:.6}, volatility = {:.6}",
        summary.n_runs, summary.mean_best_objective, summary.var_best_objective, summary.volatility
    );
    println!(
        "hindsight value = {:.6}, regret = {:.6}, chain bound = {:.6}",
        sharp_value, report.regret_mean, report.chain_bound
    );
    match pearson_correlation(&mean_best, &benchmark) {
        Ok(c) => println!("correlation with benchmark = {c:.4}"),
        Err(e) => println!("correlation undefined: {e}"),
    }
    Ok(failures.is_empty())
}

fn run_theory(args: &TheoryArgs) -> Result<bool, String> {
    let spreads: Vec<f64> = args
        .spreads
        .split(',')
        .map(|s| s.trim().parse().map_err(|e| format!("bad spread: {e}")))
        .collect::<Result<_, _>>()?;
    let params = CboParams {
        lambda0: args.lambda0,
        h: args.h,
        sigma: args.sigma,
        n_particles: args.particles,
        dim: spreads.len(),
        ..CboParams::default()
    };
    let report = check_admissibility(&params, &spreads).map_err(|e| e.to_string())?;
    fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    write(
        &args.out.join("stability.json"),
        &to_json_6sig(&report).map_err(|e| e.to_string())?,
    )?;
    let grid = sweep_grid(0.1, 8.0, 0.1);
    let mut sweep = Vec::new();
    write_lambda_sweep_csv(args.lambda0, args.h, &grid, &mut sweep).map_err(|e| e.to_string())?;
    write(
        &args.out.join("lambda_sigma.csv"),
        &String::from_utf8(sweep).unwrap(),
    )?;
    println!(
        "alpha = {:.6}, Lambda({}) = {:.6}, sigma* = {:.4}",
        report.alpha, args.sigma, report.lambda_rate, report.sigma_star
    );
    println!(
        "cond_exp = {}, cond_para = {}, decay exponent = {:.4}",
        report.cond_exp_holds, report.cond_para_holds, report.decay_exponent
    );
    Ok(true)
}

fn run_regret(args: &RegretArgs) -> Result<bool, String> {
    let rs = load_returns(&args.data, args.seed)?;
    let stats = rolling_stats(&rs, args.window).map_err(|e| e.to_string())?;
    let params = CboParams {
        lambda1: args.lambda1,
        sigma: args.sigma,
        n_particles: args.particles,
        dim: rs.n_assets(),
        beta: Beta::Finite(10.0),
        ..CboParams::default()
    };
    let mut rng = RngHandle::new(args.seed);
    let run = run_ops(&rs, &stats, &params, args.algo.into(), &mut rng)
        .map_err(|e| e.to_string())?;
    let realized = ReturnSeries::from_rows(
        rs.n_assets(),
        (args.window..rs.n_rows())
            .flat_map(|n| rs.row(n).to_vec())
            .collect(),
    )
    .map_err(|e| e.to_string())?;
    let (sharp, _) = hindsight_crp(&realized).map_err(|e| e.to_string())?;
    let report = regret(&run, &rs, &sharp).map_err(|e| e.to_string())?;
    fs::create_dir_all(&args.out).map_err(|e| e.to_string())?;
    write(
        &args.out.join("regret.json"),
        &to_json_6sig(&report).map_err(|e| e.to_string())?,
    )?;
    let mut components = String::from("step,i11,i12,i13\n");
    for n in 0..report.i11.len() {
        components.push_str(&format!(
            "{},{},{},{}\n",
            n + 1,
            report.i11[n],
            report.i12[n],
            report.i13[n]
        ));
    }
    write(&args.out.join("regret_components.csv"), &components)?;
    println!(
        "horizon {}, regret = {:.6}, chain bound = {:.6} (holds: {})",
        report.horizon,
        report.regret_mean,
        report.chain_bound,
        report.regret_mean <= report.chain_bound + 1e-9
    );
    println!(
        "component means: I11 = {:.3e}, I12 = {:.3e}, I13 = {:.3e}",
        report.i11_mean, report.i12_mean, report.i13_mean
    );
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::StaticBench(args) => run_static(args),
        Command::Portfolio(args) => run_portfolio(args),
        Command::Theory(args) => run_theory(args),
        Command::Regret(args) => run_regret(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("some replications failed");
            ExitCode::FAILURE
        }
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
