//! The projected consensus trading loop and its batch statistics.

use serde::{Deserialize, Serialize};

use crate::adam::{adam_cbo_step, AdamState};
use crate::ensemble::{ad_cbo_step_with_values, Ensemble, Projection};
use crate::error::{Error, Result};
use crate::objective::negative_sharpe;
use crate::params::CboParams;
use crate::portfolio::prices::ReturnSeries;
use crate::portfolio::stats::RollingStats;
use crate::rng::RngHandle;
use crate::simplex::project_simplex_vec;

/// Which particle update drives the trading loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OpsAlgorithm {
    /// Plain CBO: the average-drift rate is forced to 0.
    Cbo,
    /// Consensus drift plus average drift, `lambda1` taken from params.
    AdCbo,
    /// Adam-moment drift, no noise.
    AdamCbo,
}

/// One full trading run over every rolling window.
///
/// Step `n` forms the negative-Sharpe objective from window `n`, advances
/// the ensemble one projected step, and the post-step ensemble is the
/// decision for that day. Wealth is then updated with the next return
/// row (`n + window_len`), so every decision strictly precedes its
/// realization; the last window has no realized row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OpsRun {
    pub algorithm: OpsAlgorithm,
    pub params: CboParams,
    pub window_len: usize,
    /// Decision ensembles, one per window; every particle lies in S.
    pub weights_trajectory: Vec<Ensemble>,
    /// Index of the minimal-objective particle per step (lowest on ties).
    pub best_particle_index: Vec<usize>,
    /// Objective at the best particle per step (NaN on flagged steps).
    pub best_objective: Vec<f64>,
    /// Objective averaged over particles per step (NaN on flagged steps).
    pub mean_objective: Vec<f64>,
    /// Realized `r . xbar` per step with a realization.
    pub realized_mean_return: Vec<f64>,
    /// Realized `r . x_best` per step with a realization.
    pub realized_best_return: Vec<f64>,
    /// Wealth of the ensemble-mean portfolio: `S_0 = 1`,
    /// `S_n = S_{n-1} (r . xbar)`.
    pub wealth_mean: Vec<f64>,
    /// Wealth of the best-particle portfolio.
    pub wealth_best: Vec<f64>,
    /// Steps skipped because the Sharpe window was degenerate; the
    /// previous ensemble is carried forward there.
    pub flagged_steps: Vec<usize>,
}

/// Uniform (Dirichlet(1, ..., 1)) sample on the simplex via normalized
/// unit exponentials.
fn dirichlet_ensemble(n_particles: usize, d: usize, rng: &mut RngHandle) -> Result<Ensemble> {
    use rand::Rng;
    let mut positions = Vec::with_capacity(n_particles * d);
    for _ in 0..n_particles {
        let raw: Vec<f64> = (0..d).map(|_| -f64::ln(rng.gen_range(f64::MIN_POSITIVE..1.0))).collect();
        let sum: f64 = raw.iter().sum();
        positions.extend(raw.iter().map(|v| v / sum));
    }
    Ensemble::from_rows(n_particles, d, positions)
}

/// Evaluate the window objective at every particle, treating degenerate
/// variance as a per-particle `None` and propagating any other failure.
fn sharpe_values(
    ensemble: &Ensemble,
    objective: &crate::objective::RollingSharpeObjective,
) -> Result<Vec<Option<f64>>> {
    let mut out = Vec::with_capacity(ensemble.n_particles());
    for i in 0..ensemble.n_particles() {
        match negative_sharpe(objective, ensemble.particle(i)) {
            Ok(v) => out.push(Some(v)),
            Err(Error::DegenerateVariance(_)) => out.push(None),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Run one seeded trading loop over all rolling windows.
pub fn run_ops(
    returns: &ReturnSeries,
    stats: &RollingStats,
    params: &CboParams,
    algorithm: OpsAlgorithm,
    rng: &mut RngHandle,
) -> Result<OpsRun> {
    let d = stats.n_assets();
    if returns.n_assets() != d {
        return Err(Error::Input("returns and stats asset counts differ".into()));
    }
    if params.dim != d {
        return Err(Error::Input(format!(
            "params.dim = {} but data has {d} assets",
            params.dim
        )));
    }
    let mut eff = params.clone();
    if algorithm == OpsAlgorithm::Cbo {
        eff.lambda1 = 0.0;
    }
    let n = eff.n_particles;
    let mut ensemble = dirichlet_ensemble(n, d, rng)?;
    let mut adam_state = AdamState::new(n, d, 0.9, 0.99)?;
    let project: Projection<'_> = &project_simplex_vec;

    let mut run = OpsRun {
        algorithm,
        params: eff.clone(),
        window_len: stats.window_len,
        weights_trajectory: Vec::with_capacity(stats.n_windows),
        best_particle_index: Vec::with_capacity(stats.n_windows),
        best_objective: Vec::with_capacity(stats.n_windows),
        mean_objective: Vec::with_capacity(stats.n_windows),
        realized_mean_return: Vec::new(),
        realized_best_return: Vec::new(),
        wealth_mean: vec![1.0],
        wealth_best: vec![1.0],
        flagged_steps: Vec::new(),
    };

    for step in 0..stats.n_windows {
        let objective = stats.objective(step)?;
        let pre_values = sharpe_values(&ensemble, &objective)?;
        let degenerate = pre_values.iter().any(Option::is_none);
        if degenerate {
            // carry the previous weights forward
            run.flagged_steps.push(step);
        } else {
            let values: Vec<f64> = pre_values.into_iter().map(Option::unwrap).collect();
            match algorithm {
                OpsAlgorithm::Cbo | OpsAlgorithm::AdCbo => {
                    ad_cbo_step_with_values(&mut ensemble, &eff, &values, rng)?;
                    for i in 0..n {
                        let projected = project(ensemble.particle(i));
                        ensemble.particle_mut(i).copy_from_slice(&projected);
                    }
                }
                OpsAlgorithm::AdamCbo => {
                    adam_cbo_step(
                        &mut ensemble,
                        &mut adam_state,
                        eff.lambda0,
                        eff.h,
                        eff.beta,
                        &objective,
                        Some(project),
                    )?;
                }
            }
        }

        // decision bookkeeping at the post-step (or carried) positions
        let post_values = sharpe_values(&ensemble, &objective)?;
        let mut best: Option<(usize, f64)> = None;
        let mut sum = 0.0;
        let mut count = 0usize;
        for (i, v) in post_values.iter().enumerate() {
            if let Some(v) = v {
                sum += v;
                count += 1;
                if best.map_or(true, |(_, bv)| *v < bv) {
                    best = Some((i, *v));
                }
            }
        }
        let (best_idx, best_val) = best.unwrap_or((0, f64::NAN));
        run.weights_trajectory.push(ensemble.clone());
        run.best_particle_index.push(best_idx);
        run.best_objective.push(best_val);
        run.mean_objective
            .push(if count > 0 { sum / count as f64 } else { f64::NAN });

        // realized wealth update with the next return row, when it exists
        let realized_row = step + stats.window_len;
        if realized_row < returns.n_rows() {
            let r = returns.row(realized_row);
            let xbar = ensemble.mean();
            let r_mean: f64 = r.iter().zip(&xbar).map(|(a, b)| a * b).sum();
            let xb = ensemble.particle(best_idx);
            let r_best: f64 = r.iter().zip(xb).map(|(a, b)| a * b).sum();
            run.realized_mean_return.push(r_mean);
            run.realized_best_return.push(r_best);
            run.wealth_mean.push(run.wealth_mean.last().unwrap() * r_mean);
            run.wealth_best.push(run.wealth_best.last().unwrap() * r_best);
        }
    }
    Ok(run)
}

/// Across-run statistics of a batch of trading runs, one row per metric.
#[derive(Debug, Clone, Serialize)]
pub struct OpsSummary {
    pub n_runs: usize,
    /// Mean over runs of the time-averaged best-particle objective.
    pub mean_best_objective: f64,
    pub var_best_objective: f64,
    /// Mean over runs of the time-averaged ensemble-average objective.
    pub mean_avg_objective: f64,
    pub var_avg_objective: f64,
    /// Mean over runs of the time-averaged realized return `r . xbar`.
    pub mean_realized_return: f64,
    /// Portfolio volatility: standard deviation over runs of the
    /// time-averaged realized return.
    pub volatility: f64,
    /// Set when variances are degenerate (single run).
    pub single_run: bool,
}

fn finite_mean(values: &[f64]) -> f64 {
    let finite: Vec<f64> = values.iter().cloned().filter(|v| v.is_finite()).collect();
    finite.iter().sum::<f64>() / finite.len() as f64
}

fn mean_var(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Aggregate a batch of runs into the summary schema: expectation and
/// variance (denominator runs - 1) of the per-run time averages, plus
/// the across-run volatility of realized returns.
pub fn run_statistics(runs: &[OpsRun]) -> Result<OpsSummary> {
    if runs.is_empty() {
        return Err(Error::Input("need at least one run".into()));
    }
    let best: Vec<f64> = runs.iter().map(|r| finite_mean(&r.best_objective)).collect();
    let avg: Vec<f64> = runs.iter().map(|r| finite_mean(&r.mean_objective)).collect();
    let realized: Vec<f64> = runs
        .iter()
        .map(|r| r.realized_mean_return.iter().sum::<f64>() / r.realized_mean_return.len() as f64)
        .collect();
    let (mean_best, var_best) = mean_var(&best);
    let (mean_avg, var_avg) = mean_var(&avg);
    let (mean_realized, var_realized) = mean_var(&realized);
    Ok(OpsSummary {
        n_runs: runs.len(),
        mean_best_objective: mean_best,
        var_best_objective: var_best,
        mean_avg_objective: mean_avg,
        var_avg_objective: var_avg,
        mean_realized_return: mean_realized,
        volatility: var_realized.sqrt(),
        single_run: runs.len() < 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::portfolio::prices::{returns, synthesize_prices, ReturnSeries, SynthSpec};
    use crate::portfolio::stats::rolling_stats;
    use approx::assert_abs_diff_eq;

    fn small_params(d: usize, n: usize) -> CboParams {
        CboParams {
            dim: d,
            n_particles: n,
            lambda1: 1.0,
            sigma: 0.0,
            ..CboParams::default()
        }
    }

    fn synthetic(d: usize, t: usize, seed: u64) -> ReturnSeries {
        let mut spec = SynthSpec::default_three_year(d, seed);
        spec.t = t;
        returns(&synthesize_prices(&spec).unwrap()).unwrap()
    }

    #[test]
    fn single_asset_forces_unit_weight_and_product_wealth() {
        let rs = synthetic(1, 40, 3);
        let stats = rolling_stats(&rs, 5).unwrap();
        let mut rng = RngHandle::new(1);
        let run = run_ops(&rs, &stats, &small_params(1, 4), OpsAlgorithm::AdCbo, &mut rng)
            .unwrap();
        // d = 1: the simplex is the single point {1}
        for ens in &run.weights_trajectory {
            for i in 0..ens.n_particles() {
                assert_abs_diff_eq!(ens.particle(i)[0], 1.0, epsilon = 1e-12);
            }
        }
        let expected: f64 = (5..rs.n_rows()).map(|k| rs.row(k)[0]).product();
        assert_abs_diff_eq!(*run.wealth_mean.last().unwrap(), expected, epsilon = 1e-9);
    }

    #[test]
    fn zero_variance_windows_carry_forward() {
        // constant relatives: every window is degenerate
        let rs = ReturnSeries::from_rows(2, [1.01, 0.99].repeat(20)).unwrap();
        let stats = rolling_stats(&rs, 5).unwrap();
        let mut rng = RngHandle::new(2);
        let run = run_ops(&rs, &stats, &small_params(2, 3), OpsAlgorithm::Cbo, &mut rng)
            .unwrap();
        assert_eq!(run.flagged_steps.len(), stats.n_windows);
        // weights never move
        let first = run.weights_trajectory.first().unwrap();
        for ens in &run.weights_trajectory {
            assert_eq!(ens.positions(), first.positions());
        }
        assert!(run.wealth_mean.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn weights_always_feasible_wealth_positive() {
        let rs = synthetic(3, 120, 8);
        let stats = rolling_stats(&rs, 30).unwrap();
        for algo in [OpsAlgorithm::Cbo, OpsAlgorithm::AdCbo, OpsAlgorithm::AdamCbo] {
            let mut params = small_params(3, 6);
            params.sigma = if algo == OpsAlgorithm::Cbo { 0.5 } else { 0.0 };
            let mut rng = RngHandle::new(9);
            let run = run_ops(&rs, &stats, &params, algo, &mut rng).unwrap();
            for ens in &run.weights_trajectory {
                for i in 0..ens.n_particles() {
                    let w = ens.particle(i);
                    assert!(w.iter().all(|&v| v >= 0.0));
                    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }
            assert!(run.wealth_mean.iter().all(|&w| w > 0.0));
            assert!(run.wealth_best.iter().all(|&w| w > 0.0));
            assert_eq!(run.realized_mean_return.len(), stats.n_windows - 1);
        }
    }

    #[test]
    fn fixed_seed_reproduces_identical_run() {
        let rs = synthetic(2, 100, 4);
        let stats = rolling_stats(&rs, 20).unwrap();
        let mut params = small_params(2, 5);
        params.sigma = 1.0;
        let go = || {
            let mut rng = RngHandle::new(33);
            run_ops(&rs, &stats, &params, OpsAlgorithm::AdCbo, &mut rng).unwrap()
        };
        assert_eq!(go(), go());
    }

    #[test]
    fn cbo_ignores_lambda1() {
        let rs = synthetic(2, 80, 5);
        let stats = rolling_stats(&rs, 20).unwrap();
        let mut a = small_params(2, 4);
        a.lambda1 = 5.0;
        let mut b = small_params(2, 4);
        b.lambda1 = 0.0;
        let run = |p: &CboParams| {
            let mut rng = RngHandle::new(7);
            run_ops(&rs, &stats, p, OpsAlgorithm::Cbo, &mut rng).unwrap()
        };
        assert_eq!(run(&a).weights_trajectory, run(&b).weights_trajectory);
    }

    #[test]
    fn best_particle_minimizes_objective() {
        let rs = synthetic(3, 100, 6);
        let stats = rolling_stats(&rs, 25).unwrap();
        let mut rng = RngHandle::new(12);
        let run = run_ops(&rs, &stats, &small_params(3, 8), OpsAlgorithm::AdCbo, &mut rng)
            .unwrap();
        for (step, ens) in run.weights_trajectory.iter().enumerate() {
            let obj = stats.objective(step).unwrap();
            let best = run.best_particle_index[step];
            let bv = negative_sharpe(&obj, ens.particle(best)).unwrap();
            for i in 0..ens.n_particles() {
                assert!(bv <= negative_sharpe(&obj, ens.particle(i)).unwrap() + 1e-12);
            }
            assert_abs_diff_eq!(bv, run.best_objective[step], epsilon = 1e-12);
        }
    }

    #[test]
    fn statistics_identical_runs_zero_variance() {
        let rs = synthetic(2, 90, 10);
        let stats = rolling_stats(&rs, 20).unwrap();
        let mut rng = RngHandle::new(21);
        let run = run_ops(&rs, &stats, &small_params(2, 4), OpsAlgorithm::AdCbo, &mut rng)
            .unwrap();
        let summary = run_statistics(&[run.clone(), run.clone(), run]).unwrap();
        assert_eq!(summary.n_runs, 3);
        assert_eq!(summary.var_best_objective, 0.0);
        assert_eq!(summary.var_avg_objective, 0.0);
        assert_eq!(summary.volatility, 0.0);
        assert!(!summary.single_run);
    }

    #[test]
    fn single_run_variance_flagged_zero() {
        let rs = synthetic(2, 90, 11);
        let stats = rolling_stats(&rs, 20).unwrap();
        let mut rng = RngHandle::new(22);
        let run = run_ops(&rs, &stats, &small_params(2, 4), OpsAlgorithm::AdCbo, &mut rng)
            .unwrap();
        let summary = run_statistics(&[run]).unwrap();
        assert!(summary.single_run);
        assert_eq!(summary.var_best_objective, 0.0);
        assert!(run_statistics(&[]).is_err());
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let rs = synthetic(2, 90, 13);
        let stats = rolling_stats(&rs, 20).unwrap();
        let mut rng = RngHandle::new(1);
        assert!(run_ops(&rs, &stats, &small_params(3, 4), OpsAlgorithm::Cbo, &mut rng).is_err());
    }
}
