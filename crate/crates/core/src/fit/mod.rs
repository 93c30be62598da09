//! Self-contained nonlinear least-squares engine (Levenberg-Marquardt with a
//! numeric Jacobian) and the fit procedures built on it.
//!
//! The engine minimizes sum_i ((f(x_i; p) - y_i)/sigma_i)^2. Parameters are
//! plain `f64` slices in whatever units the caller chooses; the built-in
//! models in [`models`] work in MHz/ms so every parameter is order one to a
//! few hundred and the numeric Jacobian is well conditioned.

mod models;

pub use models::{
    fit_coupled_reflection, fit_coupled_transmission, fit_exponential_decay, fit_lorentzian,
    invert_dip, ReflectionFixedParams, SurvivalPoint, TransmissionFixedParams,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {parameters} data points for {parameters} parameters, got {points}")]
    TooFewPoints { points: usize, parameters: usize },
    #[error("data arrays disagree in length")]
    MismatchedLengths,
    #[error("sigma must be positive (index {index}: {sigma})")]
    NonPositiveSigma { index: usize, sigma: f64 },
    #[error("model is non-finite at the initial parameters (x = {x})")]
    NonFiniteModel { x: f64 },
    #[error("parameter {name} has no effect on any residual (singular Jacobian)")]
    SingularJacobian { name: String },
    #[error("initial value of {name} ({value}) outside bounds [{lo}, {hi}]")]
    InitialOutsideBounds {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("survival data identifies no lifetime: {0}")]
    UnidentifiableLifetime(String),
}

/// Weighted data for a one-dimensional curve fit. Missing uncertainties are
/// treated as sigma = 1.
#[derive(Debug, Clone)]
pub struct FitData {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl FitData {
    pub fn new(x: Vec<f64>, y: Vec<f64>, sigma: Option<Vec<f64>>) -> Result<Self, FitError> {
        if x.len() != y.len() {
            return Err(FitError::MismatchedLengths);
        }
        let sigma = match sigma {
            Some(s) => {
                if s.len() != x.len() {
                    return Err(FitError::MismatchedLengths);
                }
                for (index, &sigma) in s.iter().enumerate() {
                    if !(sigma > 0.0) {
                        return Err(FitError::NonPositiveSigma { index, sigma });
                    }
                }
                s
            }
            None => vec![1.0; x.len()],
        };
        Ok(Self { x, y, sigma })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Engine knobs. The defaults are the ones every built-in fit uses.
#[derive(Debug, Clone, Copy)]
pub struct FitSettings {
    /// Relative forward-difference step for the Jacobian.
    pub relative_step: f64,
    /// Initial LM damping.
    pub initial_damping: f64,
    /// Damping multiplier on a rejected step.
    pub damping_increase: f64,
    /// Damping divisor on an accepted step.
    pub damping_decrease: f64,
    /// Converged when an accepted step changes the cost by less than this,
    /// relatively.
    pub cost_tolerance: f64,
    /// Converged when the gradient norm drops below this.
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            relative_step: 1e-6,
            initial_damping: 1e-3,
            damping_increase: 10.0,
            damping_decrease: 10.0,
            cost_tolerance: 1e-10,
            gradient_tolerance: 1e-12,
            max_iterations: 200,
        }
    }
}

/// Outcome of a least-squares minimization.
///
/// `uncertainties` are one-sigma values from the covariance of the
/// linearized problem, scaled by the reduced chi-square; they are present
/// exactly when the fit converged.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub parameter_names: Vec<String>,
    pub values: Vec<f64>,
    pub uncertainties: Option<Vec<f64>>,
    /// sqrt of the weighted sum of squared residuals.
    pub residual_norm: f64,
    /// chi^2 / (n - p), or chi^2 when there are no spare degrees of freedom.
    pub reduced_chi_squared: f64,
    /// Accepted improvement steps.
    pub iterations: usize,
    pub converged: bool,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.parameter_names
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        let i = self.parameter_names.iter().position(|n| n == name)?;
        self.uncertainties.as_ref().map(|u| u[i])
    }
}

/// Levenberg-Marquardt minimization of the weighted residuals of `model`
/// against `data`, starting from `initial`, optionally constrained to a
/// parameter box.
///
/// Non-convergence is reported through [`FitResult::converged`], never by
/// silently returning a bad optimum; hard input defects are errors.
pub fn least_squares<F: Fn(f64, &[f64]) -> f64>(
    model: F,
    data: &FitData,
    initial: &[f64],
    bounds: Option<&[(f64, f64)]>,
    parameter_names: &[&str],
    settings: &FitSettings,
) -> Result<FitResult, FitError> {
    let n = data.len();
    let m = initial.len();
    assert_eq!(parameter_names.len(), m, "one name per parameter");
    if n < m {
        return Err(FitError::TooFewPoints {
            points: n,
            parameters: m,
        });
    }
    if let Some(bounds) = bounds {
        assert_eq!(bounds.len(), m, "one bound pair per parameter");
        for (i, (&p, &(lo, hi))) in initial.iter().zip(bounds).enumerate() {
            if p < lo || p > hi {
                return Err(FitError::InitialOutsideBounds {
                    name: parameter_names[i].to_string(),
                    value: p,
                    lo,
                    hi,
                });
            }
        }
    }

    let residuals = |p: &[f64]| -> Option<DVector<f64>> {
        let mut r = DVector::zeros(n);
        for i in 0..n {
            let value = model(data.x[i], p);
            if !value.is_finite() {
                return None;
            }
            r[i] = (value - data.y[i]) / data.sigma[i];
        }
        Some(r)
    };

    let mut p = initial.to_vec();
    let mut r = residuals(&p).ok_or(FitError::NonFiniteModel { x: data.x[0] })?;
    let mut cost = r.norm_squared();
    let mut damping = settings.initial_damping;
    let mut iterations = 0;
    let mut converged = false;

    for outer in 0..settings.max_iterations {
        let jac = forward_jacobian(&model, data, &p, &r, settings.relative_step);
        if outer == 0 {
            for j in 0..m {
                if jac.column(j).iter().all(|&v| v == 0.0) {
                    return Err(FitError::SingularJacobian {
                        name: parameter_names[j].to_string(),
                    });
                }
            }
        }
        let gradient = jac.transpose() * &r;
        if gradient.norm() < settings.gradient_tolerance {
            converged = true;
            break;
        }
        let jtj = jac.transpose() * &jac;
        let diag_floor = jtj.diagonal().max() * 1e-12 + f64::MIN_POSITIVE;

        let mut accepted = false;
        while damping < 1e15 {
            let mut damped = jtj.clone();
            for j in 0..m {
                damped[(j, j)] += damping * damped[(j, j)].max(diag_floor);
            }
            let Some(cholesky) = damped.cholesky() else {
                damping *= settings.damping_increase;
                continue;
            };
            let step = cholesky.solve(&(-&gradient));
            let mut trial: Vec<f64> = (0..m).map(|j| p[j] + step[j]).collect();
            if let Some(bounds) = bounds {
                for (t, &(lo, hi)) in trial.iter_mut().zip(bounds) {
                    *t = t.clamp(lo, hi);
                }
            }
            let Some(trial_r) = residuals(&trial) else {
                damping *= settings.damping_increase;
                continue;
            };
            let trial_cost = trial_r.norm_squared();
            if trial_cost <= cost {
                let relative_drop = (cost - trial_cost) / cost.max(f64::MIN_POSITIVE);
                p = trial;
                r = trial_r;
                cost = trial_cost;
                iterations += 1;
                damping = (damping / settings.damping_decrease).max(1e-15);
                accepted = true;
                if relative_drop < settings.cost_tolerance {
                    converged = true;
                }
                break;
            }
            damping *= settings.damping_increase;
        }
        if !accepted || converged {
            break;
        }
    }

    let reduced_chi_squared = if n > m {
        cost / (n - m) as f64
    } else {
        cost
    };
    let uncertainties = if converged {
        Some(covariance_sigmas(
            &model,
            data,
            &p,
            &r,
            settings.relative_step,
            reduced_chi_squared,
        ))
    } else {
        None
    };

    Ok(FitResult {
        parameter_names: parameter_names.iter().map(|s| s.to_string()).collect(),
        values: p,
        uncertainties,
        residual_norm: cost.sqrt(),
        reduced_chi_squared,
        iterations,
        converged,
    })
}

/// Forward-difference Jacobian of the weighted residuals, reusing the
/// residual vector already evaluated at `p`.
fn forward_jacobian<F: Fn(f64, &[f64]) -> f64>(
    model: &F,
    data: &FitData,
    p: &[f64],
    r: &DVector<f64>,
    relative_step: f64,
) -> DMatrix<f64> {
    let n = data.len();
    let m = p.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut shifted = p.to_vec();
    for j in 0..m {
        let h = relative_step * p[j].abs().max(1.0);
        shifted[j] = p[j] + h;
        for i in 0..n {
            let value = model(data.x[i], &shifted);
            let r_shifted = if value.is_finite() {
                (value - data.y[i]) / data.sigma[i]
            } else {
                r[i]
            };
            jac[(i, j)] = (r_shifted - r[i]) / h;
        }
        shifted[j] = p[j];
    }
    jac
}

/// Central-difference Jacobian, used only to cross-check the forward one.
#[cfg(test)]
pub(crate) fn central_jacobian<F: Fn(f64, &[f64]) -> f64>(
    model: &F,
    data: &FitData,
    p: &[f64],
    step: f64,
) -> DMatrix<f64> {
    let n = data.len();
    let m = p.len();
    let mut jac = DMatrix::zeros(n, m);
    let mut shifted = p.to_vec();
    for j in 0..m {
        let h = step * p[j].abs().max(1.0);
        shifted[j] = p[j] + h;
        let plus: Vec<f64> = data.x.iter().map(|&x| model(x, &shifted)).collect();
        shifted[j] = p[j] - h;
        let minus: Vec<f64> = data.x.iter().map(|&x| model(x, &shifted)).collect();
        shifted[j] = p[j];
        for i in 0..n {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h * data.sigma[i]);
        }
    }
    jac
}

#[cfg(test)]
pub(crate) fn forward_jacobian_for_tests<F: Fn(f64, &[f64]) -> f64>(
    model: &F,
    data: &FitData,
    p: &[f64],
    relative_step: f64,
) -> DMatrix<f64> {
    let r = DVector::from_iterator(
        data.len(),
        data.x
            .iter()
            .zip(&data.y)
            .zip(&data.sigma)
            .map(|((&x, &y), &s)| (model(x, p) - y) / s),
    );
    forward_jacobian(model, data, p, &r, relative_step)
}

fn covariance_sigmas<F: Fn(f64, &[f64]) -> f64>(
    model: &F,
    data: &FitData,
    p: &[f64],
    r: &DVector<f64>,
    relative_step: f64,
    scale: f64,
) -> Vec<f64> {
    let jac = forward_jacobian(model, data, p, r, relative_step);
    let jtj = jac.transpose() * &jac;
    let m = p.len();
    let svd = jtj.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    match svd.pseudo_inverse(cutoff) {
        Ok(cov) => (0..m)
            .map(|j| (cov[(j, j)] * scale).max(0.0).sqrt())
            .collect(),
        Err(_) => vec![f64::NAN; m],
    }
}

#[cfg(test)]
mod engine_tests {
    use super::*;
    use approx::assert_relative_eq;

    fn line(x: f64, p: &[f64]) -> f64 {
        p[0] * x
    }

    #[test]
    fn exactly_solvable_linear_model() {
        let data = FitData::new(vec![1.0, 2.0], vec![2.0, 4.0], None).unwrap();
        let fit = least_squares(line, &data, &[1.0], None, &["slope"], &FitSettings::default())
            .unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.value("slope").unwrap(), 2.0, max_relative = 1e-12);
        assert!(fit.residual_norm < 1e-10);
    }

    #[test]
    fn fixed_point_converges_with_zero_iterations() {
        // Data generated exactly from the model at the initial guess.
        let x: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&x| 3.0 * x).collect();
        let data = FitData::new(x, y, None).unwrap();
        let fit = least_squares(line, &data, &[3.0], None, &["slope"], &FitSettings::default())
            .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations, 0);
        assert_eq!(fit.residual_norm, 0.0);
    }

    #[test]
    fn singular_jacobian_is_an_error() {
        let data = FitData::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0], None).unwrap();
        let model = |x: f64, p: &[f64]| p[0] * x + 0.0 * p[1];
        let err = least_squares(
            model,
            &data,
            &[1.0, 1.0],
            None,
            &["slope", "ghost"],
            &FitSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, FitError::SingularJacobian { name } if name == "ghost"));
    }

    #[test]
    fn initial_guess_must_respect_bounds() {
        let data = FitData::new(vec![1.0, 2.0], vec![2.0, 4.0], None).unwrap();
        let err = least_squares(
            line,
            &data,
            &[-1.0],
            Some(&[(0.0, f64::INFINITY)]),
            &["slope"],
            &FitSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, FitError::InitialOutsideBounds { .. }));
    }

    #[test]
    fn underdetermined_data_is_an_error() {
        let data = FitData::new(vec![1.0], vec![2.0], None).unwrap();
        let err = least_squares(
            |x, p: &[f64]| p[0] * x + p[1],
            &data,
            &[1.0, 0.0],
            None,
            &["a", "b"],
            &FitSettings::default(),
        )
        .unwrap_err();
        assert!(matches!(err, FitError::TooFewPoints { .. }));
    }

    #[test]
    fn bounds_keep_parameter_non_negative() {
        // Best unconstrained slope is negative; the box pins it at zero.
        let data = FitData::new(vec![1.0, 2.0, 3.0], vec![-1.0, -2.0, -3.0], None).unwrap();
        let fit = least_squares(
            line,
            &data,
            &[0.5],
            Some(&[(0.0, f64::INFINITY)]),
            &["slope"],
            &FitSettings::default(),
        )
        .unwrap();
        assert!(fit.values[0] >= 0.0);
        assert!(fit.values[0] < 1e-6);
    }

    #[test]
    fn determinism() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|&x| 2.0 * (-x).exp() + 0.05 * (x * 7.0).sin())
            .collect();
        let data = FitData::new(x, y, None).unwrap();
        let model = |x: f64, p: &[f64]| p[0] * (-x / p[1]).exp();
        let a = least_squares(model, &data, &[1.0, 2.0], None, &["a", "t"], &FitSettings::default())
            .unwrap();
        let b = least_squares(model, &data, &[1.0, 2.0], None, &["a", "t"], &FitSettings::default())
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn monotone_cost_on_accepted_steps() {
        // Capping the iteration count exposes the accepted-step cost
        // sequence: it must never increase.
        let x: Vec<f64> = (0..60).map(|i| i as f64 * 0.2).collect();
        let y: Vec<f64> = x.iter().map(|&x| 5.0 * (-x / 3.0).exp() + 0.1).collect();
        let data = FitData::new(x, y, None).unwrap();
        let model = |x: f64, p: &[f64]| p[0] * (-x / p[1]).exp() + p[2];
        let mut previous = f64::INFINITY;
        for max_iterations in 1..=25 {
            let settings = FitSettings {
                max_iterations,
                ..FitSettings::default()
            };
            let fit = least_squares(model, &data, &[1.0, 1.0, 0.0], None, &["a", "t", "b"], &settings)
                .unwrap();
            assert!(fit.residual_norm <= previous + 1e-12);
            previous = fit.residual_norm;
        }
        let fit = least_squares(
            model,
            &data,
            &[1.0, 1.0, 0.0],
            None,
            &["a", "t", "b"],
            &FitSettings::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.value("a").unwrap(), 5.0, max_relative = 1e-6);
        assert_relative_eq!(fit.value("t").unwrap(), 3.0, max_relative = 1e-6);
    }

    #[test]
    fn non_positive_sigma_rejected() {
        assert!(matches!(
            FitData::new(vec![1.0], vec![1.0], Some(vec![0.0])),
            Err(FitError::NonPositiveSigma { .. })
        ));
    }
}
