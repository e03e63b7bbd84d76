//! Hindsight constant-rebalanced benchmark and empirical regret.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::portfolio::ops::OpsRun;
use crate::portfolio::prices::ReturnSeries;
use crate::rng::RngHandle;
use crate::simplex::{project_simplex, SimplexPoint};

/// Mean log-growth of a constant portfolio: `(1/M) sum_n log(1 + r_n . x)`.
pub fn crp_objective(returns: &ReturnSeries, x: &[f64]) -> f64 {
    let m = returns.n_rows();
    (0..m)
        .map(|n| {
            let rx: f64 = returns.row(n).iter().zip(x).map(|(a, b)| a * b).sum();
            (1.0 + rx).ln()
        })
        .sum::<f64>()
        / m as f64
}

const CRP_ITERS: usize = 10_000;
const CRP_RESTARTS: usize = 20;

fn crp_gradient(returns: &ReturnSeries, x: &[f64], grad: &mut [f64]) {
    let d = returns.n_assets();
    let m = returns.n_rows();
    grad.iter_mut().for_each(|g| *g = 0.0);
    for n in 0..m {
        let r = returns.row(n);
        let rx: f64 = r.iter().zip(x).map(|(a, b)| a * b).sum();
        let w = 1.0 / (m as f64 * (1.0 + rx));
        for i in 0..d {
            grad[i] += w * r[i];
        }
    }
}

fn crp_ascent(returns: &ReturnSeries, start: Vec<f64>) -> (Vec<f64>, f64) {
    let d = returns.n_assets();
    let mut x = start;
    let mut grad = vec![0.0; d];
    for iter in 1..=CRP_ITERS {
        crp_gradient(returns, &x, &mut grad);
        let step = 0.1 / (iter as f64).sqrt();
        let moved: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + step * g).collect();
        x = project_simplex(&moved)
            .expect("finite ascent iterate")
            .into_weights();
    }
    // the sqrt-decay schedule plateaus at O(step * |grad|); polish with a
    // backtracking projected-gradient phase so every restart lands on the
    // same optimum of the concave objective
    let mut value = crp_objective(returns, &x);
    for _ in 0..1000 {
        crp_gradient(returns, &x, &mut grad);
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-12 {
            let moved: Vec<f64> = x.iter().zip(&grad).map(|(xi, g)| xi + t * g).collect();
            let candidate = project_simplex(&moved)
                .expect("finite ascent iterate")
                .into_weights();
            let cv = crp_objective(returns, &candidate);
            if cv > value {
                improved = cv - value > 1e-15;
                x = candidate;
                value = cv;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (x, value)
}

/// Best constant-rebalanced portfolio in hindsight:
/// `argmax over S of (1/M) sum_n log(1 + r_n . x)` by projected-gradient
/// ascent (step `0.1/sqrt(iter)`, 10^4 iterations, 20 restarts, best
/// kept). The objective is concave on S, so the restarts only guard
/// against boundary stalls; they are seeded internally for determinism.
pub fn hindsight_crp(returns: &ReturnSeries) -> Result<(SimplexPoint, f64)> {
    let d = returns.n_assets();
    if returns.n_rows() == 0 {
        return Err(Error::Input("need at least one return row".into()));
    }
    let mut rng = RngHandle::new(0x0c1_f00d);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for restart in 0..CRP_RESTARTS {
        let start = if restart == 0 {
            vec![1.0 / d as f64; d]
        } else {
            let raw: Vec<f64> = (0..d)
                .map(|_| -f64::ln(rng.gen_range(f64::MIN_POSITIVE..1.0)))
                .collect();
            let sum: f64 = raw.iter().sum();
            raw.iter().map(|v| v / sum).collect()
        };
        let (x, value) = crp_ascent(returns, start);
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite hindsight objective".into()));
        }
        if best.as_ref().map_or(true, |(_, bv)| value > *bv) {
            best = Some((x, value));
        }
    }
    let (x, value) = best.unwrap();
    Ok((project_simplex(&x)?, value))
}

/// Empirical regret of one trading run against a hindsight benchmark,
/// with the pathwise chain bound and the per-step decomposition terms.
#[derive(Debug, Clone, Serialize)]
pub struct RegretReport {
    /// Number of realized (decision, return) pairs.
    pub horizon: usize,
    /// Regret of the ensemble-mean portfolio (the defining quantity).
    pub regret_mean: f64,
    /// Regret of the best-particle portfolio, reported separately.
    pub regret_best: f64,
    pub hindsight_portfolio: SimplexPoint,
    /// Mean log-growth of the hindsight portfolio.
    pub hindsight_value: f64,
    /// Pathwise upper bound `(1/M) sum (j_n . x#)/(j_n . xbar_n) - 1`.
    pub chain_bound: f64,
    /// Per-step decomposition terms (length M - 1, steps n >= 1).
    pub i11: Vec<f64>,
    pub i12: Vec<f64>,
    pub i13: Vec<f64>,
    pub i11_mean: f64,
    pub i12_mean: f64,
    pub i13_mean: f64,
    /// Per-step max-return vertex coordinate of `x_n#`.
    pub sharp_indices: Vec<usize>,
    /// Per-step particle index maximizing `r_n . x_n^i`.
    pub k_indices: Vec<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Evaluate the regret report for a finished run. The realized return of
/// decision `n` is row `n + window_len`; only steps with a realization
/// participate.
pub fn regret(
    run: &OpsRun,
    returns: &ReturnSeries,
    hindsight: &SimplexPoint,
) -> Result<RegretReport> {
    let d = returns.n_assets();
    if hindsight.weights().len() != d {
        return Err(Error::Input("hindsight portfolio dimension mismatch".into()));
    }
    let m = run
        .weights_trajectory
        .len()
        .min(returns.n_rows().saturating_sub(run.window_len));
    if m == 0 {
        return Err(Error::Input("run and returns share no realized step".into()));
    }
    let x_sharp = hindsight.weights();
    let mut regret_mean = 0.0;
    let mut regret_best = 0.0;
    let mut hindsight_value = 0.0;
    let mut chain_bound = 0.0;
    let mut sharp_indices = Vec::with_capacity(m);
    let mut k_indices = Vec::with_capacity(m);
    // per-step quantities reused by the decomposition
    let mut j_rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut xbars: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut sharp_vertices: Vec<usize> = Vec::with_capacity(m);
    for n in 0..m {
        let ens = &run.weights_trajectory[n];
        if ens.dim() != d {
            return Err(Error::Input("run dimension does not match returns".into()));
        }
        let r = returns.row(n + run.window_len);
        let xbar = ens.mean();
        let r_mean = dot(r, &xbar);
        let r_best = dot(r, ens.particle(run.best_particle_index[n]));
        let r_sharp = dot(r, x_sharp);
        regret_mean += (1.0 + r_sharp).ln() - (1.0 + r_mean).ln();
        regret_best += (1.0 + r_sharp).ln() - (1.0 + r_best).ln();
        hindsight_value += (1.0 + r_sharp).ln();

        let j: Vec<f64> = r.iter().map(|v| 1.0 + v).collect();
        chain_bound += dot(&j, x_sharp) / dot(&j, &xbar);

        // per-step max-return vertex and best-return particle
        let mut vertex = 0;
        for i in 1..d {
            if r[i] > r[vertex] {
                vertex = i;
            }
        }
        let mut k = 0;
        let mut k_val = dot(r, ens.particle(0));
        for i in 1..ens.n_particles() {
            let v = dot(r, ens.particle(i));
            if v > k_val {
                k = i;
                k_val = v;
            }
        }
        sharp_indices.push(vertex);
        k_indices.push(k);
        j_rows.push(j);
        xbars.push(xbar);
        sharp_vertices.push(vertex);
    }
    let mf = m as f64;
    regret_mean /= mf;
    regret_best /= mf;
    hindsight_value /= mf;
    chain_bound = chain_bound / mf - 1.0;

    // decomposition terms for n >= 1, with x_n# the max-return vertex
    let mut i11 = Vec::with_capacity(m.saturating_sub(1));
    let mut i12 = Vec::with_capacity(m.saturating_sub(1));
    let mut i13 = Vec::with_capacity(m.saturating_sub(1));
    for n in 1..m {
        let jn = &j_rows[n];
        let jp = &j_rows[n - 1];
        let xbar_n = &xbars[n];
        let jn_sharp = jn[sharp_vertices[n]];
        let jp_sharp = jp[sharp_vertices[n - 1]];
        let jn_xbar = dot(jn, xbar_n);
        let jp_xbar = dot(jp, xbar_n);
        i11.push((jn_sharp - jp_sharp) / jn_xbar);
        i12.push(jp_sharp * (jp_xbar - jn_xbar) / (jn_xbar * jp_xbar));
        let diff: f64 = (0..d)
            .map(|l| {
                let sharp_l = if l == sharp_vertices[n - 1] { 1.0 } else { 0.0 };
                jp[l] * (sharp_l - xbar_n[l])
            })
            .sum();
        i13.push(diff / jp_xbar);
    }
    let mean_of = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    Ok(RegretReport {
        horizon: m,
        regret_mean,
        regret_best,
        hindsight_portfolio: hindsight.clone(),
        hindsight_value,
        chain_bound,
        i11_mean: mean_of(&i11),
        i12_mean: mean_of(&i12),
        i13_mean: mean_of(&i13),
        i11,
        i12,
        i13,
        sharp_indices,
        k_indices,
    })
}

/// Per-step average over runs of the best-particle realized return.
pub fn mean_best_return_curve(runs: &[OpsRun]) -> Result<Vec<f64>> {
    let m = runs
        .first()
        .ok_or_else(|| Error::Input("need at least one run".into()))?
        .realized_best_return
        .len();
    if runs.iter().any(|r| r.realized_best_return.len() != m) {
        return Err(Error::Input("runs have mismatched horizons".into()));
    }
    let mut curve = vec![0.0; m];
    for run in runs {
        for (c, v) in curve.iter_mut().zip(&run.realized_best_return) {
            *c += v;
        }
    }
    curve.iter_mut().for_each(|c| *c /= runs.len() as f64);
    Ok(curve)
}

/// Realized per-step return of a constant portfolio on the same realized
/// rows the trading loop saw.
pub fn benchmark_return_curve(
    returns: &ReturnSeries,
    window_len: usize,
    portfolio: &SimplexPoint,
) -> Result<Vec<f64>> {
    if window_len >= returns.n_rows() {
        return Err(Error::Input("no realized rows for this window".into()));
    }
    Ok((window_len..returns.n_rows())
        .map(|n| dot(returns.row(n), portfolio.weights()))
        .collect())
}

/// Pearson correlation of two equal-length curves; a zero-variance input
/// is flagged as degenerate rather than returning NaN.
pub fn pearson_correlation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Input("curves must share a length >= 2".into()));
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut caa = 0.0;
    let mut cbb = 0.0;
    let mut cab = 0.0;
    for (x, y) in a.iter().zip(b) {
        caa += (x - ma) * (x - ma);
        cbb += (y - mb) * (y - mb);
        cab += (x - ma) * (y - mb);
    }
    if caa <= 0.0 || cbb <= 0.0 {
        return Err(Error::DegenerateVariance(
            "correlation undefined for a constant curve".into(),
        ));
    }
    Ok(cab / (caa * cbb).sqrt())
}
