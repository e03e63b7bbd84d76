//! Closed-form stability quantities of the discrete scheme.
//!
//! Everything here is a pure numerical evaluation: the folded-normal
//! contraction factor `alpha`, the auxiliary function `g` and its root
//! `y*`, the log-Lyapunov rate `Lambda(sigma)` and its root `sigma*`,
//! the initialization constant `C~`, the trajectory constant `C`, and
//! the Laplace-principle diagnostic `E(beta)`.
//!
//! Root finders are plain bisection: the bracketed functions are proven
//! monotone, so guaranteed convergence beats Newton's speed here.

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::params::CboParams;
use crate::rng::RngHandle;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const FRAC_PI_2_SQRT: f64 = 1.253_314_137_315_500_3; // sqrt(pi/2)

/// Numerical evaluation of every closed-form stability quantity for one
/// parameter choice.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// Contraction factor `alpha = E|1 - lambda0 h - sigma eta_h|`.
    pub alpha: f64,
    /// Unique positive root of `g`.
    pub y_star: f64,
    /// `0 < lambda0 h < 1` and `sigma < (1 - lambda0 h) / (y* sqrt(h))`.
    pub cond_exp_holds: bool,
    /// `(1 - lambda0 h)^2 + sigma^2 < 1`.
    pub cond_para_holds: bool,
    /// Log-Lyapunov rate `Lambda(sigma)`.
    pub lambda_rate: f64,
    /// Root of `Lambda`, the noise ceiling.
    pub sigma_star: f64,
    /// Initialization constant `C~`.
    pub c_tilde: f64,
    /// Trajectory constant `C` (None when the admissibility conditions fail).
    pub c_bound: Option<f64>,
    /// `2 lambda0 - lambda0^2 h - sigma^2`.
    pub decay_exponent: f64,
}

/// Mean of the folded normal distribution: `E|X|` for `X ~ N(mu, s^2)`,
/// via the erf closed form. `s = 0` degenerates to `|mu|`.
pub fn folded_normal_mean(mu: f64, s: f64) -> f64 {
    if s == 0.0 {
        return mu.abs();
    }
    s * (2.0 / std::f64::consts::PI).sqrt() * (-mu * mu / (2.0 * s * s)).exp()
        + mu * libm::erf(mu / (SQRT_2 * s))
}

/// `g(y) = (1/y) sqrt(pi/2) exp(-y^2/2) - erf(-y/sqrt(2)) - 1/(1 - lambda0 h)`.
///
/// Strictly decreasing on (0, inf), +inf at 0+, and tending to
/// `1 - 1/(1 - lambda0 h) < 0`; its unique zero is `y*`.
pub fn g_function(y: f64, lambda0h: f64) -> Result<f64> {
    if y <= 0.0 {
        return Err(Error::Domain(format!("g is defined for y > 0, got {y}")));
    }
    Ok(FRAC_PI_2_SQRT / y * (-y * y / 2.0).exp() - libm::erf(-y / SQRT_2)
        - 1.0 / (1.0 - lambda0h))
}

fn bisect(
    mut lo: f64,
    mut hi: f64,
    mut f_lo: f64,
    tol: f64,
    f: impl Fn(f64) -> f64,
) -> f64 {
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if (f_mid > 0.0) == (f_lo > 0.0) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Unique positive root of [`g_function`], by bisection to 1e-10.
pub fn y_star(lambda0h: f64) -> Result<f64> {
    if !(lambda0h > 0.0 && lambda0h < 1.0) {
        return Err(Error::Domain(format!(
            "y* requires 0 < lambda0 h < 1, got {lambda0h}"
        )));
    }
    let f = |y: f64| g_function(y, lambda0h).expect("y > 0 inside bracket");
    let lo = 1e-12;
    let f_lo = f(lo);
    let mut hi = 1.0;
    while f(hi) > 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical("y* bracketing failed".into()));
        }
    }
    if !(f_lo > 0.0) {
        return Err(Error::Numerical("y* bracketing failed: no sign change".into()));
    }
    Ok(bisect(lo, hi, f_lo, 1e-10, f))
}

/// Standard normal density.
fn phi(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Adaptive Simpson quadrature.
fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn simpson(f: &impl Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> Result<f64> {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 {
            return Err(Error::Numerical("quadrature did not converge".into()));
        }
        if delta.abs() <= 15.0 * tol {
            return Ok(left + right + delta / 15.0);
        }
        Ok(recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)?
            + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)?)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}

/// `Lambda(sigma) = E[log|1 - h lambda0 - sigma sqrt(h) Z|]`, Z standard
/// normal, by adaptive quadrature. The logarithmic singularity at
/// `z0 = (1 - h lambda0)/(sigma sqrt(h))` is excised on a band of
/// half-width 1e-4 and integrated analytically there
/// (`log` against a locally constant density). Absolute target 1e-6.
pub fn lambda_rate(sigma: f64, lambda0: f64, h: f64) -> Result<f64> {
    let a = 1.0 - h * lambda0;
    if sigma == 0.0 {
        if a == 0.0 {
            return Err(Error::Domain(
                "Lambda undefined at sigma = 0 with lambda0 h = 1".into(),
            ));
        }
        return Ok(a.abs().ln());
    }
    let s = sigma * h.sqrt();
    let z0 = a / s;
    let f = |z: f64| (a - s * z).abs().ln() * phi(z);
    let span = 14.0_f64;
    let lo = (z0 - span).min(-span);
    let hi = (z0 + span).max(span);
    const DELTA: f64 = 1e-4;
    let tol = 2.5e-7;
    // band contribution: integral of log(s |z - z0|) phi(z) over the band,
    // with phi frozen at z0: phi(z0) * 2 delta * (log(s delta) - 1)
    let band = phi(z0) * 2.0 * DELTA * ((s * DELTA).ln() - 1.0);
    let left = adaptive_simpson(&f, lo, z0 - DELTA, tol)?;
    let right = adaptive_simpson(&f, z0 + DELTA, hi, tol)?;
    Ok(left + band + right)
}

/// Root of `Lambda(sigma)` in sigma, by bisection to 1e-4: the noise
/// ceiling for almost-sure pairwise consensus.
pub fn sigma_star(lambda0: f64, h: f64) -> Result<f64> {
    let a = lambda0 * h;
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!(
            "sigma* requires 0 < lambda0 h < 1, got {a}"
        )));
    }
    let f = |sigma: f64| lambda_rate(sigma, lambda0, h).expect("quadrature in bracket");
    let lo = 1e-6;
    let f_lo = f(lo);
    if !(f_lo < 0.0) {
        return Err(Error::Numerical("sigma* bracketing failed at 0+".into()));
    }
    let mut hi = 1.0;
    while f(hi) < 0.0 {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical("sigma* bracketing failed".into()));
        }
    }
    Ok(bisect(lo, hi, f_lo, 1e-4, f))
}

/// Initialization constant
/// `C~ = 4 sqrt(3 N) max{ |sum_l s_l|, sum_l s_l^2 }` for per-coordinate
/// Gaussian initial data with spreads `s`.
pub fn lem_init_constant(n_particles: usize, s: &[f64]) -> Result<f64> {
    if n_particles == 0 || s.is_empty() || s.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Input(
            "C~ requires N >= 1 and strictly positive spreads".into(),
        ));
    }
    let sum: f64 = s.iter().sum();
    let sum_sq: f64 = s.iter().map(|v| v * v).sum();
    Ok(4.0 * (3.0 * n_particles as f64).sqrt() * sum.abs().max(sum_sq))
}

/// Trajectory constant
/// `C = max{ 2 C~ / (1 - alpha), 2 sqrt(C~) / (1 - sqrt((1-lambda0 h)^2 + sigma^2)) }`,
/// defined only when both admissibility conditions hold.
pub fn cor_ab_constant(params: &CboParams, s: &[f64]) -> Result<f64> {
    let a = params.lambda0 * params.h;
    let ys = y_star(a)?;
    let cond_exp = params.sigma < (1.0 - a) / (ys * params.h.sqrt());
    if !cond_exp || !params.cond_para() {
        return Err(Error::Domain(
            "C requires the contraction and parameter conditions to hold".into(),
        ));
    }
    let c_tilde = lem_init_constant(params.n_particles, s)?;
    let alpha = folded_normal_mean(1.0 - a, params.sigma * params.h.sqrt());
    let rho = ((1.0 - a) * (1.0 - a) + params.sigma * params.sigma).sqrt();
    Ok((2.0 * c_tilde / (1.0 - alpha)).max(2.0 * c_tilde.sqrt() / (1.0 - rho)))
}

/// Evaluate both admissibility conditions and every derived quantity for
/// one parameter set. `s` supplies the Gaussian initialization spreads
/// for the constants; conditions themselves do not depend on it.
pub fn check_admissibility(params: &CboParams, s: &[f64]) -> Result<StabilityReport> {
    let a = params.lambda0 * params.h;
    let basic = params.cond_exp_basic();
    let (ys, cond_exp) = if basic {
        let ys = y_star(a)?;
        let holds = params.sigma < (1.0 - a) / (ys * params.h.sqrt());
        (ys, holds)
    } else {
        (f64::NAN, false)
    };
    let alpha = folded_normal_mean(1.0 - a, params.sigma * params.h.sqrt());
    let cond_para = params.cond_para();
    let lambda = lambda_rate(params.sigma, params.lambda0, params.h)?;
    let sigma_ceiling = if basic { sigma_star(params.lambda0, params.h)? } else { f64::NAN };
    let c_tilde = lem_init_constant(params.n_particles, s)?;
    let c_bound = cor_ab_constant(params, s).ok();
    Ok(StabilityReport {
        alpha,
        y_star: ys,
        cond_exp_holds: cond_exp,
        cond_para_holds: cond_para,
        lambda_rate: lambda,
        sigma_star: sigma_ceiling,
        c_tilde,
        c_bound,
        decay_exponent: params.decay_exponent(),
    })
}

/// Monte-Carlo estimate of the Laplace-principle error diagnostic
///
/// `E(beta) = -min L(x_0) - (1/beta) log E[exp(-beta L(x_0))] - (1/beta) log eps`
///
/// over initial points `x_0` with independent `N(0, s_l^2)` coordinates.
/// The essential infimum is approximated by the sample minimum (the true
/// essinf over a continuum is not computable). Shifted log-sum-exp keeps
/// large beta stable.
pub fn error_diagnostic_e(
    beta_grid: &[f64],
    objective: &dyn Objective,
    init_spreads: &[f64],
    epsilon: f64,
    samples: usize,
    rng: &mut RngHandle,
) -> Result<Vec<(f64, f64)>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Input(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    if samples < 10_000 {
        return Err(Error::Input(format!(
            "E(beta) needs at least 10^4 samples, got {samples}"
        )));
    }
    let d = init_spreads.len();
    let dists: Vec<Normal<f64>> = init_spreads
        .iter()
        .map(|&s| Normal::new(0.0, s).map_err(|e| Error::Input(format!("bad spread: {e}"))))
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(samples);
    let mut x = vec![0.0; d];
    for _ in 0..samples {
        for (l, dist) in dists.iter().enumerate() {
            x[l] = dist.sample(rng);
        }
        let v = objective.eval(&x);
        if !v.is_finite() {
            return Err(Error::Numerical("objective non-finite during sampling".into()));
        }
        values.push(v);
    }
    let vmin = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let out = beta_grid
        .iter()
        .map(|&beta| {
            // log mean exp(-beta L) = -beta vmin + log mean exp(-beta (L - vmin))
            let mean_shifted: f64 = values
                .iter()
                .map(|&v| (-beta * (v - vmin)).exp())
                .sum::<f64>()
                / samples as f64;
            let log_mean = -beta * vmin + mean_shifted.ln();
            let e = -vmin - log_mean / beta - epsilon.ln() / beta;
            (beta, e)
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::FnObjective;
    use approx::assert_abs_diff_eq;
    use rand_distr::StandardNormal;

    #[test]
    fn folded_normal_standard_half_normal() {
        assert_abs_diff_eq!(
            folded_normal_mean(0.0, 1.0),
            (2.0 / std::f64::consts::PI).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn folded_normal_degenerate() {
        assert_eq!(folded_normal_mean(-3.0, 0.0), 3.0);
        assert_eq!(folded_normal_mean(2.5, 0.0), 2.5);
    }

    #[test]
    fn folded_normal_paper_regime_below_one() {
        // lambda0 h = 0.15, sigma sqrt(h) ~ 0.6 keeps the factor below 1
        let v = folded_normal_mean(0.85, 0.6);
        assert!(v < 1.0, "got {v}");
        // Monte-Carlo cross-check at 1e7 samples
        let mut rng = RngHandle::new(31);
        let n = 10_000_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            acc += (0.85 + 0.6 * z).abs();
        }
        let mc = acc / n as f64;
        assert_abs_diff_eq!(v, mc, epsilon = 5e-4);
    }

    #[test]
    fn folded_normal_lower_bounds() {
        for &(mu, s) in &[(0.3, 0.2), (0.9, 0.5), (-0.4, 1.2), (0.0, 0.7)] {
            let v = folded_normal_mean(mu, s);
            assert!(v >= mu.abs() - 1e-14);
            let half = s * (2.0 / std::f64::consts::PI).sqrt()
                * (-mu * mu / (2.0 * s * s)).exp();
            assert!(v >= half - 1e-14);
        }
    }

    #[test]
    fn g_paper_bound_at_sqrt2() {
        // lambda0 h = 0.15: g(sqrt 2) < sqrt(pi)/(2e) + 0.85 - 1/0.85 < 0
        let g = g_function(SQRT_2, 0.15).unwrap();
        let paper_bound =
            std::f64::consts::PI.sqrt() / (2.0 * std::f64::consts::E) + 0.85 - 1.0 / 0.85;
        assert!(g < paper_bound);
        assert!(paper_bound < 0.0);
    }

    #[test]
    fn g_blows_up_at_zero_and_limits_at_infinity() {
        assert!(g_function(1e-6, 0.15).unwrap() > 1e3);
        let a = 0.15;
        let tail = g_function(50.0, a).unwrap();
        assert_abs_diff_eq!(tail, 1.0 - 1.0 / (1.0 - a), epsilon = 1e-6);
        assert!(g_function(0.0, a).is_err());
        assert!(g_function(-1.0, a).is_err());
    }

    #[test]
    fn g_strictly_decreasing() {
        for a in [0.05, 0.15, 0.3] {
            let mut prev = f64::INFINITY;
            for k in 0..1000 {
                // log-spaced grid on [1e-3, 6]; beyond that both terms
                // saturate to their limits at double precision
                let y = 1e-3 * (6.0_f64 / 1e-3).powf(k as f64 / 999.0);
                let g = g_function(y, a).unwrap();
                assert!(g < prev, "g not decreasing at y={y}, a={a}");
                prev = g;
            }
        }
    }

    #[test]
    fn y_star_is_a_root_and_monotone() {
        for a in [0.05, 0.15, 0.3] {
            let ys = y_star(a).unwrap();
            assert!(g_function(ys, a).unwrap().abs() < 1e-9);
        }
        // smaller lambda0 h gives a larger root
        assert!(y_star(0.05).unwrap() > y_star(0.3).unwrap());
        // paper's example regime: y*(0.15) < sqrt 2
        assert!(y_star(0.15).unwrap() < SQRT_2);
        assert!(y_star(1.5).is_err());
    }

    #[test]
    fn lambda_rate_deterministic_case() {
        assert_abs_diff_eq!(
            lambda_rate(0.0, 1.0, 0.1).unwrap(),
            0.9_f64.ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn lambda_rate_large_sigma_asymptote() {
        // Lambda(sigma) - log(sigma sqrt h) -> E[log|Z|] = -(gamma + log 2)/2
        let e_log_abs_z = -0.635_181_422_730_739_1;
        let sigma = 1e3;
        let v = lambda_rate(sigma, 1.0, 0.1).unwrap();
        assert_abs_diff_eq!(v - (sigma * 0.1_f64.sqrt()).ln(), e_log_abs_z, epsilon = 1e-3);
    }

    #[test]
    fn lambda_rate_near_paper_root() {
        assert!(lambda_rate(5.17, 1.0, 0.1).unwrap().abs() < 0.01);
    }

    #[test]
    fn lambda_rate_single_sign_change() {
        // continuous, crossing zero exactly once on (0, 20)
        let mut crossings = 0;
        let mut prev = lambda_rate(0.05, 1.0, 0.1).unwrap();
        for k in 1..200 {
            let sigma = 0.05 + (20.0 - 0.05) * k as f64 / 199.0;
            let v = lambda_rate(sigma, 1.0, 0.1).unwrap();
            if (v > 0.0) != (prev > 0.0) {
                crossings += 1;
            }
            prev = v;
        }
        assert_eq!(crossings, 1);
    }

    #[test]
    fn sigma_star_matches_paper_and_is_a_root() {
        let root = sigma_star(1.0, 0.1).unwrap();
        assert!((root - 5.17).abs() < 0.05, "sigma* = {root}");
        assert!(lambda_rate(root, 1.0, 0.1).unwrap().abs() < 1e-5);
    }

    #[test]
    fn sigma_star_grows_toward_unit_step() {
        // as lambda0 h -> 1 the deterministic part shrinks and the noise
        // ceiling rises toward exp(-E log|Z|)/sqrt(h)
        let mid = sigma_star(5.0, 0.1).unwrap();
        let high = sigma_star(9.0, 0.1).unwrap();
        assert!(
            high > mid,
            "expected sigma* to increase toward lambda0 h = 1: {mid} vs {high}"
        );
    }

    #[test]
    fn check_admissibility_deterministic_case() {
        let params = CboParams {
            lambda0: 5.0,
            h: 0.1,
            sigma: 0.0,
            ..CboParams::default()
        };
        let report = check_admissibility(&params, &[1.0; 15]).unwrap();
        assert!(report.cond_exp_holds);
        assert!(report.cond_para_holds);
        assert_abs_diff_eq!(report.alpha, 0.5, epsilon = 1e-12);
        assert!(report.c_bound.is_some());
    }

    #[test]
    fn check_admissibility_rejects_large_step() {
        let params = CboParams {
            lambda0: 15.0,
            h: 0.1,
            ..CboParams::default()
        };
        let report = check_admissibility(&params, &[1.0; 15]).unwrap();
        assert!(!report.cond_exp_holds);
    }

    #[test]
    fn check_admissibility_paper_recipe() {
        // Remark regime: lambda0 h = 0.15, sigma sqrt(h) just below
        // (1 - lambda0 h)/sqrt(2) ~ 0.601
        let params = CboParams {
            lambda0: 1.5,
            h: 0.1,
            sigma: 0.6 / 0.1_f64.sqrt() * 0.99,
            ..CboParams::default()
        };
        let report = check_admissibility(&params, &[1.0; 15]).unwrap();
        assert!(report.cond_exp_holds);
        assert!(report.alpha < 1.0);
    }

    #[test]
    fn cond_exp_implies_alpha_below_one() {
        // random admissible triples
        use rand::Rng;
        let mut rng = RngHandle::new(13);
        let mut checked = 0;
        while checked < 1000 {
            let lambda0 = rng.gen_range(0.1..5.0);
            let h = rng.gen_range(0.01..0.5);
            let a = lambda0 * h;
            if a >= 1.0 {
                continue;
            }
            let sigma = rng.gen_range(0.0..3.0);
            let ys = y_star(a).unwrap();
            if sigma >= (1.0 - a) / (ys * h.sqrt()) {
                continue;
            }
            let alpha = folded_normal_mean(1.0 - a, sigma * h.sqrt());
            assert!(alpha < 1.0, "alpha = {alpha} for ({lambda0}, {h}, {sigma})");
            checked += 1;
        }
    }

    #[test]
    fn c_tilde_hand_values() {
        assert_abs_diff_eq!(
            lem_init_constant(1, &[1.0]).unwrap(),
            4.0 * 3.0_f64.sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(lem_init_constant(3, &[1.0, 1.0]).unwrap(), 24.0, epsilon = 1e-12);
        // doubling spreads with the quadratic term dominant quadruples C~
        let base = lem_init_constant(4, &[2.0, 2.0]).unwrap();
        let doubled = lem_init_constant(4, &[4.0, 4.0]).unwrap();
        assert_abs_diff_eq!(doubled / base, 4.0, epsilon = 1e-12);
        assert!(lem_init_constant(0, &[1.0]).is_err());
        assert!(lem_init_constant(2, &[0.0]).is_err());
    }

    #[test]
    fn cor_ab_deterministic_form() {
        let params = CboParams {
            lambda0: 5.0,
            h: 0.1,
            sigma: 0.0,
            n_particles: 3,
            ..CboParams::default()
        };
        let s = [1.0, 1.0];
        let c = cor_ab_constant(&params, &s).unwrap();
        let c_tilde = lem_init_constant(3, &s).unwrap();
        let a = 0.5;
        let expected = (2.0 * c_tilde / a).max(2.0 * c_tilde.sqrt() / a);
        assert_abs_diff_eq!(c, expected, epsilon = 1e-9);
    }

    #[test]
    fn cor_ab_rejects_inadmissible() {
        let params = CboParams {
            sigma: 2.0,
            ..CboParams::default()
        };
        assert!(cor_ab_constant(&params, &[1.0]).is_err());
    }

    #[test]
    fn e_beta_constant_objective() {
        // L = c -> E(beta) = -(1/beta) log eps exactly
        let obj = FnObjective {
            dim: 2,
            f: |_: &[f64]| 3.5,
        };
        let mut rng = RngHandle::new(1);
        let eps = 0.25;
        let out =
            error_diagnostic_e(&[1.0, 10.0, 100.0], &obj, &[1.0, 1.0], eps, 10_000, &mut rng)
                .unwrap();
        for (beta, e) in out {
            assert_abs_diff_eq!(e, -eps.ln() / beta, epsilon = 1e-10);
        }
    }

    #[test]
    fn e_beta_epsilon_one_drops_term() {
        let obj = FnObjective {
            dim: 1,
            f: |x: &[f64]| x[0] * x[0],
        };
        let mut rng_a = RngHandle::new(2);
        let mut rng_b = RngHandle::new(2);
        let with_eps =
            error_diagnostic_e(&[10.0], &obj, &[1.0], 0.5, 10_000, &mut rng_a).unwrap();
        let without =
            error_diagnostic_e(&[10.0], &obj, &[1.0], 1.0, 10_000, &mut rng_b).unwrap();
        assert_abs_diff_eq!(
            with_eps[0].1 - without[0].1,
            -0.5_f64.ln() / 10.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn e_beta_decreases_on_rastrigin() {
        let obj = crate::objective::Rastrigin { dim: 2 };
        let mut rng = RngHandle::new(3);
        let out = error_diagnostic_e(&[10.0, 1000.0], &obj, &[1.0, 1.0], 1.0, 100_000, &mut rng)
            .unwrap();
        assert!(out[1].1 < out[0].1);
    }

    #[test]
    fn e_beta_input_validation() {
        let obj = FnObjective {
            dim: 1,
            f: |_: &[f64]| 0.0,
        };
        let mut rng = RngHandle::new(0);
        assert!(error_diagnostic_e(&[1.0], &obj, &[1.0], 0.0, 10_000, &mut rng).is_err());
        assert!(error_diagnostic_e(&[1.0], &obj, &[1.0], 0.5, 100, &mut rng).is_err());
    }

    #[test]
    fn folded_normal_monte_carlo_grid() {
        // closed form vs 10^6-sample Monte Carlo on a (mu, s) grid
        let mut rng = RngHandle::new(55);
        for &mu in &[0.0, 0.3, 0.85] {
            for &s in &[0.2, 0.6, 1.1] {
                let n = 1_000_000;
                let mut acc = 0.0;
                for _ in 0..n {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    acc += (mu + s * z).abs();
                }
                let mc = acc / n as f64;
                assert_abs_diff_eq!(folded_normal_mean(mu, s), mc, epsilon = 5e-3);
            }
        }
    }
}
