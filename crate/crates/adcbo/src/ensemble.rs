//! Particle ensemble state and the discrete Ad-CBO update rule.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::{Objective, TimeObjective};
use crate::params::{Beta, CboParams, NoiseMode};
use crate::rng::RngHandle;

/// N particles in d dimensions, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    n_particles: usize,
    dim: usize,
    positions: Vec<f64>,
    step_index: usize,
}

impl Ensemble {
    pub fn from_rows(n_particles: usize, dim: usize, positions: Vec<f64>) -> Result<Self> {
        if n_particles == 0 || dim == 0 {
            return Err(Error::Input("ensemble must have N >= 1 and d >= 1".into()));
        }
        if positions.len() != n_particles * dim {
            return Err(Error::Input(format!(
                "positions length {} != N*d = {}",
                positions.len(),
                n_particles * dim
            )));
        }
        if positions.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("ensemble positions must be finite".into()));
        }
        Ok(Ensemble {
            n_particles,
            dim,
            positions,
            step_index: 0,
        })
    }

    /// Uniform initialization on a per-coordinate box `[lo, hi]^d`.
    pub fn uniform_init(
        n_particles: usize,
        dim: usize,
        lo: f64,
        hi: f64,
        rng: &mut RngHandle,
    ) -> Result<Self> {
        let positions = (0..n_particles * dim)
            .map(|_| rng.gen_range(lo..hi))
            .collect();
        Ensemble::from_rows(n_particles, dim, positions)
    }

    /// Per-coordinate Gaussian initialization, `x^l ~ N(0, s_l^2)`.
    pub fn gaussian_init(n_particles: usize, s: &[f64], rng: &mut RngHandle) -> Result<Self> {
        let dim = s.len();
        let mut positions = Vec::with_capacity(n_particles * dim);
        for _ in 0..n_particles {
            for &sl in s {
                let dist = Normal::new(0.0, sl)
                    .map_err(|e| Error::Input(format!("invalid init spread: {e}")))?;
                positions.push(dist.sample(rng));
            }
        }
        Ensemble::from_rows(n_particles, dim, positions)
    }

    pub fn n_particles(&self) -> usize {
        self.n_particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn particle(&self, i: usize) -> &[f64] {
        &self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn particle_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.positions[i * self.dim..(i + 1) * self.dim]
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// Ensemble mean, one entry per coordinate.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for i in 0..self.n_particles {
            for (l, v) in self.particle(i).iter().enumerate() {
                m[l] += v;
            }
        }
        let n = self.n_particles as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Evaluate a static objective at every particle, erroring with the
    /// offending index on a non-finite value.
    pub fn evaluate(&self, objective: &dyn Objective) -> Result<Vec<f64>> {
        self.evaluate_with(|x| objective.eval(x))
    }

    fn evaluate_with(&self, f: impl Fn(&[f64]) -> f64) -> Result<Vec<f64>> {
        let mut values = Vec::with_capacity(self.n_particles);
        for i in 0..self.n_particles {
            let v = f(self.particle(i));
            if !v.is_finite() {
                return Err(Error::NonFiniteObjective { index: i });
            }
            values.push(v);
        }
        Ok(values)
    }
}

/// One Gaussian noise draw, each entry ~ N(0, h). In common-noise mode a
/// single draw is shared by every particle of a step.
#[derive(Debug, Clone)]
pub struct NoiseDraw {
    pub values: Vec<f64>,
}

impl NoiseDraw {
    pub fn sample(dim: usize, h: f64, rng: &mut RngHandle) -> Self {
        let dist = Normal::new(0.0, h.sqrt()).expect("h > 0");
        NoiseDraw {
            values: (0..dim).map(|_| dist.sample(rng)).collect(),
        }
    }
}

/// Weighted consensus point `M_beta`: softmin-weighted average of the
/// particle positions.
///
/// Weights are `exp(-beta (L_i - L_min))`, the min-shift being exact for
/// the mathematical value and mandatory for stability at large beta.
/// `Beta::Infinity` returns the position of the minimal-value particle,
/// lowest index on ties.
pub fn weighted_consensus_point(
    positions: &Ensemble,
    objective_values: &[f64],
    beta: Beta,
) -> Result<Vec<f64>> {
    let n = positions.n_particles();
    if n == 0 || objective_values.len() != n {
        return Err(Error::Input(format!(
            "objective values length {} != N = {n}",
            objective_values.len()
        )));
    }
    if objective_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite objective value".into()));
    }
    match beta {
        Beta::Infinity => {
            let mut best = 0;
            for i in 1..n {
                if objective_values[i] < objective_values[best] {
                    best = i;
                }
            }
            Ok(positions.particle(best).to_vec())
        }
        Beta::Finite(b) => {
            if !(b > 0.0) {
                return Err(Error::Input(format!("beta must be > 0, got {b}")));
            }
            let lmin = objective_values.iter().cloned().fold(f64::INFINITY, f64::min);
            let mut m = vec![0.0; positions.dim()];
            let mut wsum = 0.0;
            for i in 0..n {
                let w = (-b * (objective_values[i] - lmin)).exp();
                wsum += w;
                for (l, v) in positions.particle(i).iter().enumerate() {
                    m[l] += w * v;
                }
            }
            m.iter_mut().for_each(|v| *v /= wsum);
            Ok(m)
        }
    }
}

/// Per-coordinate and global max pairwise distance
/// `max_{i,j} |x^{i,l} - x^{j,l}|`; the global value is the max over
/// coordinates. This is the consensus criterion of the plain scheme.
pub fn diameter(ensemble: &Ensemble) -> (Vec<f64>, f64) {
    let d = ensemble.dim();
    let mut per_coord = vec![0.0_f64; d];
    for l in 0..d {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..ensemble.n_particles() {
            let v = ensemble.particle(i)[l];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        per_coord[l] = hi - lo;
    }
    let global = per_coord.iter().cloned().fold(0.0, f64::max);
    (per_coord, global)
}

/// Max Euclidean pairwise distance `max_{i,j} ||x^i - x^j||`; the
/// consensus criterion of the Adam variant, kept distinct from
/// [`diameter`] on purpose.
pub fn max_pairwise_distance(ensemble: &Ensemble) -> f64 {
    let n = ensemble.n_particles();
    let mut best = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            let d2: f64 = ensemble
                .particle(i)
                .iter()
                .zip(ensemble.particle(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Advance the ensemble by one discrete Ad-CBO step, with the objective
/// values at the current positions already computed.
///
/// `x' = x - lambda0 h (x - M) - lambda1 h (xbar - M) - sigma (x - M) . W`
///
/// In common-noise mode one draw W is shared by all particles. No draw is
/// consumed at all when sigma = 0, so noiseless runs are independent of
/// the RNG stream.
pub fn ad_cbo_step_with_values(
    ensemble: &mut Ensemble,
    params: &CboParams,
    values: &[f64],
    rng: &mut RngHandle,
) -> Result<()> {
    let consensus = weighted_consensus_point(ensemble, values, params.beta)?;
    let mean = ensemble.mean();
    let d = ensemble.dim();
    let n = ensemble.n_particles();

    let common = if params.sigma > 0.0 && params.noise == NoiseMode::Common {
        Some(NoiseDraw::sample(d, params.h, rng))
    } else {
        None
    };

    let l0h = params.lambda0 * params.h;
    let l1h = params.lambda1 * params.h;
    for i in 0..n {
        let draw = if params.sigma > 0.0 && params.noise == NoiseMode::Independent {
            Some(NoiseDraw::sample(d, params.h, rng))
        } else {
            common.clone()
        };
        let row = ensemble.particle_mut(i);
        for l in 0..d {
            let diff = row[l] - consensus[l];
            let mut x = row[l] - l0h * diff - l1h * (mean[l] - consensus[l]);
            if let Some(w) = &draw {
                x -= params.sigma * diff * w.values[l];
            }
            row[l] = x;
        }
    }
    ensemble.step_index += 1;
    Ok(())
}

/// One Ad-CBO step, evaluating the objective at the current positions.
pub fn ad_cbo_step(
    ensemble: &mut Ensemble,
    params: &CboParams,
    objective: &dyn Objective,
    rng: &mut RngHandle,
) -> Result<()> {
    let values = ensemble.evaluate(objective)?;
    ad_cbo_step_with_values(ensemble, params, &values, rng)
}

/// Outcome of a run to consensus.
#[derive(Debug, Clone, Serialize)]
pub struct ConsensusResult {
    pub final_positions: Ensemble,
    /// Ensemble mean at the stopping step.
    pub consensus_point: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective_at_consensus: f64,
}

/// Iterate [`ad_cbo_step`] until the per-coordinate diameter drops below
/// `eps_tol` or `max_iters` is reached. Exhausting the cap is not an
/// error; it is reported as `converged = false`.
pub fn run_until_consensus(
    mut ensemble: Ensemble,
    params: &CboParams,
    objective: &dyn Objective,
    rng: &mut RngHandle,
) -> Result<ConsensusResult> {
    let mut iterations = 0;
    let mut converged = diameter(&ensemble).1 < params.eps_tol;
    while !converged && iterations < params.max_iters {
        ad_cbo_step(&mut ensemble, params, objective, rng)?;
        iterations += 1;
        converged = diameter(&ensemble).1 < params.eps_tol;
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

/// Projection applied to every particle after a dynamic step.
pub type Projection<'a> = &'a (dyn Fn(&[f64]) -> Vec<f64> + Sync);

/// Run the scheme against a time-indexed objective for exactly `horizon`
/// steps, applying `projection` to each particle after every step.
///
/// Returns the trajectory `[state_0, state_1, ..., state_horizon]`
/// (initial state included).
pub fn run_dynamic(
    initial: Ensemble,
    params: &CboParams,
    objective: &dyn TimeObjective,
    horizon: usize,
    projection: Option<Projection<'_>>,
    rng: &mut RngHandle,
) -> Result<Vec<Ensemble>> {
    let mut trajectory = Vec::with_capacity(horizon + 1);
    let mut ensemble = initial;
    trajectory.push(ensemble.clone());
    for step in 0..horizon {
        let values = ensemble.evaluate_with(|x| objective.eval_at(step, x))?;
        ad_cbo_step_with_values(&mut ensemble, params, &values, rng)?;
        if let Some(project) = projection {
            for i in 0..ensemble.n_particles() {
                let projected = project(ensemble.particle(i));
                ensemble.particle_mut(i).copy_from_slice(&projected);
            }
        }
        trajectory.push(ensemble.clone());
    }
    Ok(trajectory)
}

/// Trajectory export: CSV with columns `step,particle,coord_0..coord_{d-1}`,
/// rows ordered by step then particle.
pub fn write_trajectory_csv<W: std::io::Write>(
    trajectory: &[Ensemble],
    out: &mut W,
) -> Result<()> {
    let dim = trajectory.first().map(|e| e.dim()).unwrap_or(0);
    write!(out, "step,particle")?;
    for l in 0..dim {
        write!(out, ",coord_{l}")?;
    }
    writeln!(out)?;
    for (step, ensemble) in trajectory.iter().enumerate() {
        for i in 0..ensemble.n_particles() {
            write!(out, "{step},{i}")?;
            for v in ensemble.particle(i) {
                write!(out, ",{v}")?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}
