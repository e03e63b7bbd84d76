//! Adam-moment variant of the consensus drift.
//!
//! The drift `g = lambda0 (x - M_beta)` is fed through first/second
//! moment estimates before the position update. The bias correction uses
//! the constant factors `(1 - beta1)`, `(1 - beta2)`; the step-dependent
//! powers of standard Adam are available behind a flag for comparison.

use serde::Serialize;

use crate::ensemble::{
    max_pairwise_distance, weighted_consensus_point, ConsensusResult, Ensemble, Projection,
};
use crate::error::{Error, Result};
use crate::objective::{Objective, TimeObjective};
use crate::params::Beta;

const DENOM_GUARD: f64 = 1e-6;

/// First/second moment estimates, one row per particle.
#[derive(Debug, Clone, Serialize)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub step_count: usize,
    /// Use `(1 - beta^n)` bias correction instead of the constant factors.
    pub power_correction: bool,
}

impl AdamState {
    /// Zero-initialized moments for an N x d ensemble.
    pub fn new(n_particles: usize, dim: usize, beta1: f64, beta2: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) {
            return Err(Error::Input(format!(
                "decay rates must lie in [0,1): beta1={beta1}, beta2={beta2}"
            )));
        }
        Ok(AdamState {
            m: vec![0.0; n_particles * dim],
            v: vec![0.0; n_particles * dim],
            beta1,
            beta2,
            step_count: 0,
            power_correction: false,
        })
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }
}

/// Configuration of an Adam-CBO run.
#[derive(Debug, Clone, Serialize)]
pub struct AdamConfig {
    pub h: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda0: f64,
    pub beta: Beta,
    pub power_correction: bool,
}

impl AdamConfig {
    /// Paper defaults: beta1 = 0.9, beta2 = 0.99, constant bias factors.
    pub fn new(h: f64, lambda0: f64, beta: Beta) -> Self {
        AdamConfig {
            h,
            beta1: 0.9,
            beta2: 0.99,
            lambda0,
            beta,
            power_correction: false,
        }
    }
}

/// One Adam step with the consensus point already computed.
fn adam_step_with_consensus(
    ensemble: &mut Ensemble,
    state: &mut AdamState,
    lambda0: f64,
    h: f64,
    consensus: &[f64],
    projection: Option<Projection<'_>>,
) -> Result<()> {
    let n = ensemble.n_particles();
    let d = ensemble.dim();
    state.step_count += 1;
    let (c1, c2) = if state.power_correction {
        (
            1.0 - state.beta1.powi(state.step_count as i32),
            1.0 - state.beta2.powi(state.step_count as i32),
        )
    } else {
        (1.0 - state.beta1, 1.0 - state.beta2)
    };
    for i in 0..n {
        for l in 0..d {
            let k = i * d + l;
            let g = lambda0 * (ensemble.particle(i)[l] - consensus[l]);
            if !g.is_finite() {
                return Err(Error::NonFiniteObjective { index: i });
            }
            state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g;
            state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g;
            let m_hat = state.m[k] / c1;
            let v_hat = state.v[k] / c2;
            ensemble.particle_mut(i)[l] -= h * m_hat / (v_hat.sqrt() + DENOM_GUARD);
        }
    }
    if let Some(project) = projection {
        for i in 0..n {
            let projected = project(ensemble.particle(i));
            ensemble.particle_mut(i).copy_from_slice(&projected);
        }
    }
    Ok(())
}

/// One Adam-CBO step against a static objective; no noise is drawn.
pub fn adam_cbo_step(
    ensemble: &mut Ensemble,
    state: &mut AdamState,
    lambda0: f64,
    h: f64,
    beta: Beta,
    objective: &dyn Objective,
    projection: Option<Projection<'_>>,
) -> Result<()> {
    if state.m.len() != ensemble.n_particles() * ensemble.dim() {
        return Err(Error::Input("Adam state does not match ensemble shape".into()));
    }
    let values = ensemble.evaluate(objective)?;
    let consensus = weighted_consensus_point(ensemble, &values, beta)?;
    adam_step_with_consensus(ensemble, state, lambda0, h, &consensus, projection)
}

/// Static-mode run: loop while the max Euclidean pairwise distance
/// exceeds `eps_tol`, capped at `max_iters`.
pub fn run_adam_static(
    mut ensemble: Ensemble,
    config: &AdamConfig,
    eps_tol: f64,
    max_iters: usize,
    objective: &dyn Objective,
) -> Result<ConsensusResult> {
    let mut state = AdamState::new(ensemble.n_particles(), ensemble.dim(), config.beta1, config.beta2)?;
    state.power_correction = config.power_correction;
    let mut iterations = 0;
    let mut converged = max_pairwise_distance(&ensemble) <= eps_tol;
    while !converged && iterations < max_iters {
        adam_cbo_step(
            &mut ensemble,
            &mut state,
            config.lambda0,
            config.h,
            config.beta,
            objective,
            None,
        )?;
        iterations += 1;
        converged = max_pairwise_distance(&ensemble) <= eps_tol;
    }
    let consensus_point = ensemble.mean();
    let objective_at_consensus = objective.eval(&consensus_point);
    Ok(ConsensusResult {
        final_positions: ensemble,
        consensus_point,
        iterations,
        converged,
        objective_at_consensus,
    })
}

/// Dynamic-mode run: exactly `horizon` steps against a time-indexed
/// objective, with the projection applied to every particle each step.
/// Returns the trajectory including the initial state.
pub fn run_adam_dynamic(
    initial: Ensemble,
    config: &AdamConfig,
    horizon: usize,
    objective: &dyn TimeObjective,
    projection: Option<Projection<'_>>,
) -> Result<Vec<Ensemble>> {
    let mut ensemble = initial;
    let mut state = AdamState::new(ensemble.n_particles(), ensemble.dim(), config.beta1, config.beta2)?;
    state.power_correction = config.power_correction;
    let mut trajectory = Vec::with_capacity(horizon + 1);
    trajectory.push(ensemble.clone());
    for step in 0..horizon {
        let mut values = Vec::with_capacity(ensemble.n_particles());
        for i in 0..ensemble.n_particles() {
            let v = objective.eval_at(step, ensemble.particle(i));
            if !v.is_finite() {
                return Err(Error::NonFiniteObjective { index: i });
            }
            values.push(v);
        }
        let consensus = weighted_consensus_point(&ensemble, &values, config.beta)?;
        adam_step_with_consensus(
            &mut ensemble,
            &mut state,
            config.lambda0,
            config.h,
            &consensus,
            projection,
        )?;
        trajectory.push(ensemble.clone());
    }
    Ok(trajectory)
}
