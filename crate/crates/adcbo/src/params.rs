use serde::{Deserialize, Serialize};

/// Inverse temperature of the weighted consensus point. `Infinity`
/// selects the best particle outright (lowest index on ties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Finite(f64),
    Infinity,
}

impl Beta {
    pub fn finite(self) -> Option<f64> {
        match self {
            Beta::Finite(b) => Some(b),
            Beta::Infinity => None,
        }
    }
}

/// Whether one noise draw per step is shared by all particles or each
/// particle gets its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseMode {
    Common,
    Independent,
}

/// Scalar hyperparameters of the discrete particle scheme.
///
/// Construction never rejects; admissibility of the parameter choice is
/// queryable through [`CboParams::cond_exp_basic`] and
/// [`CboParams::cond_para`] (the full contraction condition involving
/// the `y*` root lives in [`crate::theory::check_admissibility`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CboParams {
    /// Drift rate toward the consensus point (> 0).
    pub lambda0: f64,
    /// Average-drift rate (>= 0).
    pub lambda1: f64,
    /// Noise intensity (>= 0).
    pub sigma: f64,
    /// Time step (> 0).
    pub h: f64,
    /// Inverse temperature of the weighted average.
    pub beta: Beta,
    /// Particle count N (>= 1).
    pub n_particles: usize,
    /// Search dimension d (>= 1).
    pub dim: usize,
    /// Consensus tolerance (> 0).
    pub eps_tol: f64,
    /// Hard iteration cap (>= 1).
    pub max_iters: usize,
    /// Common (one draw per step, shared) or independent per-particle noise.
    pub noise: NoiseMode,
}

impl Default for CboParams {
    fn default() -> Self {
        CboParams {
            lambda0: 1.0,
            lambda1: 0.0,
            sigma: 0.0,
            h: 0.1,
            beta: Beta::Finite(100.0),
            n_particles: 50,
            dim: 15,
            eps_tol: 1e-6,
            max_iters: 1_000_000,
            noise: NoiseMode::Common,
        }
    }
}

impl CboParams {
    /// `0 < lambda0 * h < 1`.
    pub fn cond_exp_basic(&self) -> bool {
        let a = self.lambda0 * self.h;
        a > 0.0 && a < 1.0
    }

    /// `(1 - lambda0 h)^2 + sigma^2 < 1`.
    pub fn cond_para(&self) -> bool {
        let a = 1.0 - self.lambda0 * self.h;
        a * a + self.sigma * self.sigma < 1.0
    }

    /// Both basic conditions at once.
    pub fn is_admissible(&self) -> bool {
        self.cond_exp_basic() && self.cond_para()
    }

    /// `2 lambda0 - lambda0^2 h - sigma^2`, the exponential decay rate of
    /// the mean-square diameter when positive.
    pub fn decay_exponent(&self) -> f64 {
        2.0 * self.lambda0 - self.lambda0 * self.lambda0 * self.h - self.sigma * self.sigma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params_are_admissible() {
        let p = CboParams::default();
        assert!(p.cond_exp_basic());
        assert!(p.cond_para());
    }

    #[test]
    fn cond_exp_basic_rejects_large_step() {
        let p = CboParams {
            lambda0: 15.0,
            h: 0.1,
            ..CboParams::default()
        };
        assert!(!p.cond_exp_basic());
    }

    #[test]
    fn cond_para_rejects_large_sigma() {
        let p = CboParams {
            sigma: 1.0,
            ..CboParams::default()
        };
        // (0.9)^2 + 1 > 1
        assert!(!p.cond_para());
    }
}
