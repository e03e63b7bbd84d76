//! Objective functions behind a single evaluation contract.

use crate::error::{Error, Result};

/// A static scalar objective. Evaluation must be pure: the same input
/// always produces the same output.
pub trait Objective: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64]) -> f64;
    /// Optional Lipschitz constant, user-supplied, diagnostics only.
    fn lipschitz(&self) -> Option<f64> {
        None
    }
    /// Optional lower bound, diagnostics only.
    fn lower_bound(&self) -> Option<f64> {
        None
    }
}

/// A time-indexed objective `L_n`.
pub trait TimeObjective: Sync {
    fn dim(&self) -> usize;
    fn eval_at(&self, step: usize, x: &[f64]) -> f64;
}

/// Adapter: view a static objective as a (constant-in-time) dynamic one.
pub struct StaticAsDynamic<'a>(pub &'a dyn Objective);

impl TimeObjective for StaticAsDynamic<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn eval_at(&self, _step: usize, x: &[f64]) -> f64 {
        self.0.eval(x)
    }
}

/// Closure-backed objective, mostly for tests and the harness.
pub struct FnObjective<F: Fn(&[f64]) -> f64 + Sync> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> Objective for FnObjective<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

/// Dimension-normalized Rastrigin function:
/// `f(x) = (1/d) * sum_i (x_i^2 - 10 cos(2 pi x_i) + 10)`.
///
/// Nonnegative everywhere, zero exactly at the origin, with a dense
/// lattice of local minima.
pub fn rastrigin(x: &[f64]) -> Result<f64> {
    if x.is_empty() {
        return Err(Error::Input("rastrigin: empty input".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Input("rastrigin: non-finite input".into()));
    }
    let d = x.len() as f64;
    let sum: f64 = x
        .iter()
        .map(|&v| v * v - 10.0 * (2.0 * std::f64::consts::PI * v).cos() + 10.0)
        .sum();
    Ok(sum / d)
}

/// Rastrigin as an [`Objective`]. Ships a lower bound of 0 and no global
/// Lipschitz constant (it is Lipschitz only on compacts).
pub struct Rastrigin {
    pub dim: usize,
}

impl Objective for Rastrigin {
    fn dim(&self) -> usize {
        self.dim
    }
    fn eval(&self, x: &[f64]) -> f64 {
        rastrigin(x).unwrap_or(f64::NAN)
    }
    fn lower_bound(&self) -> Option<f64> {
        Some(0.0)
    }
}

/// Epsilon guard under the Sharpe-ratio denominator.
pub const SHARPE_DENOM_EPS: f64 = 1e-12;

/// Negative Sharpe ratio for one rolling window:
/// `L(x) = -(mu . x) / sqrt(x' Sigma x)`.
#[derive(Debug, Clone)]
pub struct RollingSharpeObjective {
    mu: Vec<f64>,
    /// Row-major d x d covariance.
    cov: Vec<f64>,
}

impl RollingSharpeObjective {
    /// `cov` is row-major d x d; symmetry is checked to 1e-12.
    pub fn new(mu: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let d = mu.len();
        if cov.len() != d * d {
            return Err(Error::Input(format!(
                "covariance size {} does not match dimension {}",
                cov.len(),
                d
            )));
        }
        for i in 0..d {
            for j in (i + 1)..d {
                if (cov[i * d + j] - cov[j * d + i]).abs() > 1e-12 {
                    return Err(Error::Input(format!(
                        "covariance not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(RollingSharpeObjective { mu, cov })
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let d = self.mu.len();
        let mut q = 0.0;
        for i in 0..d {
            let mut row = 0.0;
            for j in 0..d {
                row += self.cov[i * d + j] * x[j];
            }
            q += x[i] * row;
        }
        q
    }
}

/// Evaluate the negative Sharpe ratio, refusing degenerate variance.
pub fn negative_sharpe(obj: &RollingSharpeObjective, x: &[f64]) -> Result<f64> {
    let q = obj.quadratic_form(x).max(0.0);
    if q <= SHARPE_DENOM_EPS {
        return Err(Error::DegenerateVariance(format!(
            "portfolio variance {q:.3e} below epsilon guard"
        )));
    }
    let mean: f64 = obj.mu.iter().zip(x).map(|(m, v)| m * v).sum();
    Ok(-mean / q.sqrt())
}

impl Objective for RollingSharpeObjective {
    fn dim(&self) -> usize {
        self.mu.len()
    }
    /// NaN signals the degenerate-variance domain error to the stepper.
    fn eval(&self, x: &[f64]) -> f64 {
        negative_sharpe(self, x).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rastrigin_zero_at_origin() {
        for d in [1, 2, 15] {
            assert_eq!(rastrigin(&vec![0.0; d]).unwrap(), 0.0);
        }
    }

    #[test]
    fn rastrigin_at_ones_is_one() {
        for d in [1, 3, 15] {
            assert_abs_diff_eq!(rastrigin(&vec![1.0; d]).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rastrigin_hand_value() {
        // term1 = 0.25 + 10 + 10, term2 = 0, mean = 10.125
        assert_abs_diff_eq!(rastrigin(&[0.5, 0.0]).unwrap(), 10.125, epsilon = 1e-12);
    }

    #[test]
    fn rastrigin_rejects_non_finite() {
        assert!(rastrigin(&[f64::NAN]).is_err());
        assert!(rastrigin(&[1.0, f64::INFINITY]).is_err());
        assert!(rastrigin(&[]).is_err());
    }

    #[test]
    fn rastrigin_nonnegative_on_grid() {
        // dense sampling in [-0.5, 0.5]^2; equality only at the origin
        for i in 0..=40 {
            for j in 0..=40 {
                let x = [-0.5 + i as f64 / 40.0, -0.5 + j as f64 / 40.0];
                let v = rastrigin(&x).unwrap();
                assert!(v >= 0.0);
                if x != [0.0, 0.0] {
                    assert!(v > 0.0, "zero away from origin at {x:?}");
                }
            }
        }
    }

    #[test]
    fn rastrigin_permutation_symmetric() {
        let a = rastrigin(&[0.3, -1.2, 2.5]).unwrap();
        let b = rastrigin(&[2.5, 0.3, -1.2]).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn sharpe_unit_coordinate() {
        let obj = RollingSharpeObjective::new(
            vec![0.02, 0.05],
            vec![0.04, 0.0, 0.0, 0.09],
        )
        .unwrap();
        // x = e_1 -> -mu_1 / sqrt(Sigma_11)
        assert_abs_diff_eq!(
            negative_sharpe(&obj, &[1.0, 0.0]).unwrap(),
            -0.02 / 0.2,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            negative_sharpe(&obj, &[0.0, 1.0]).unwrap(),
            -0.05 / 0.3,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sharpe_uniform_identity_cov() {
        // mu = c 1, Sigma = I, x uniform -> -c sqrt(d)
        let d = 4;
        let c = 0.03;
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            cov[i * d + i] = 1.0;
        }
        let obj = RollingSharpeObjective::new(vec![c; d], cov).unwrap();
        let x = vec![1.0 / d as f64; d];
        assert_abs_diff_eq!(
            negative_sharpe(&obj, &x).unwrap(),
            -c * (d as f64).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn sharpe_zero_cov_is_domain_error() {
        let obj = RollingSharpeObjective::new(vec![0.01, 0.01], vec![0.0; 4]).unwrap();
        match negative_sharpe(&obj, &[0.5, 0.5]) {
            Err(Error::DegenerateVariance(_)) => {}
            other => panic!("expected degenerate variance, got {other:?}"),
        }
    }

    #[test]
    fn sharpe_scale_invariant() {
        let obj = RollingSharpeObjective::new(
            vec![0.01, -0.02, 0.03],
            vec![0.05, 0.01, 0.0, 0.01, 0.04, 0.005, 0.0, 0.005, 0.06],
        )
        .unwrap();
        let x = [0.2, 0.3, 0.5];
        let cx: Vec<f64> = x.iter().map(|v| v * 3.7).collect();
        let a = negative_sharpe(&obj, &x).unwrap();
        let b = negative_sharpe(&obj, &cx).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    #[test]
    fn asymmetric_cov_rejected() {
        assert!(RollingSharpeObjective::new(vec![0.0, 0.0], vec![1.0, 0.1, 0.2, 1.0]).is_err());
    }
}
