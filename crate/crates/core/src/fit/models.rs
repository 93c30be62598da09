//! The built-in fit procedures: Lorentzian linewidth extraction, coupled
//! atom-cavity spectrum fits, and exponential lifetime fits.
//!
//! All of them run on the shared engine with its default settings. Spectrum
//! frequencies arrive as angular rad/s and are fitted in ordinary MHz, so
//! reported parameters like `fwhm_mhz` or `g0_mhz` read directly as "2 pi x
//! that many MHz".

use crate::constants::{angular_from_mhz, mhz_from_angular};
use crate::spectra::{CoupledSystem, Spectrum, SpectrumPoint};

use super::{least_squares, FitData, FitError, FitResult, FitSettings};

const UNBOUNDED: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
const POSITIVE: (f64, f64) = (1e-12, f64::INFINITY);
const NON_NEGATIVE: (f64, f64) = (0.0, f64::INFINITY);

fn spectrum_data(spectrum: &Spectrum) -> FitData {
    let x = spectrum
        .iter()
        .map(|p| mhz_from_angular(p.frequency))
        .collect();
    let y = spectrum.iter().map(|p| p.value).collect();
    let sigma = spectrum.iter().map(|p| p.sigma.unwrap_or(1.0)).collect();
    FitData {
        x,
        y,
        sigma: sigma,
    }
}

/// Flip a dip-shaped spectrum into a peak: v -> max(v) - v. Sigmas and the
/// FWHM of any Lorentzian feature are unchanged.
pub fn invert_dip(spectrum: &Spectrum) -> Spectrum {
    let top = spectrum
        .iter()
        .map(|p| p.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let points = spectrum
        .iter()
        .map(|p| SpectrumPoint {
            frequency: p.frequency,
            value: top - p.value,
            sigma: p.sigma,
        })
        .collect();
    Spectrum::new(points).expect("inversion preserves validity")
}

fn lorentzian_peak(x: f64, p: &[f64]) -> f64 {
    let half_width = 0.5 * p[2];
    let denom = (x - p[1]) * (x - p[1]) + half_width * half_width;
    p[0] * half_width * half_width / denom + p[3]
}

/// Fit A (G/2)^2 / ((x - x0)^2 + (G/2)^2) + B to a peak-shaped spectrum.
///
/// Parameters: `amplitude`, `center_mhz`, `fwhm_mhz`, `offset`. The initial
/// guess comes from the peak location, the half-maximum crossings, and the
/// edge baseline. Dip-shaped data should pass through [`invert_dip`] first.
pub fn fit_lorentzian(spectrum: &Spectrum) -> Result<FitResult, FitError> {
    let data = spectrum_data(spectrum);
    let n = data.len();
    if n < 4 {
        return Err(FitError::TooFewPoints {
            points: n,
            parameters: 4,
        });
    }
    let y_min = data.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = data.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if y_max == y_min {
        return Err(FitError::DegenerateData(
            "all spectrum values are identical".into(),
        ));
    }

    let edge = (n / 10).clamp(1, 5);
    let baseline = 0.5
        * (data.y[..edge].iter().sum::<f64>() / edge as f64
            + data.y[n - edge..].iter().sum::<f64>() / edge as f64);
    let peak_idx = data
        .y
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let amplitude = data.y[peak_idx] - baseline;
    let half_level = baseline + 0.5 * amplitude;
    let span = data.x[n - 1] - data.x[0];
    let left = crossing_below(&data, peak_idx, half_level, -1).unwrap_or(data.x[peak_idx] - span / 8.0);
    let right = crossing_below(&data, peak_idx, half_level, 1).unwrap_or(data.x[peak_idx] + span / 8.0);
    let guess = [
        amplitude,
        data.x[peak_idx],
        (right - left).abs().max(span / 100.0),
        baseline,
    ];
    least_squares(
        lorentzian_peak,
        &data,
        &guess,
        Some(&[UNBOUNDED, UNBOUNDED, POSITIVE, UNBOUNDED]),
        &["amplitude", "center_mhz", "fwhm_mhz", "offset"],
        &FitSettings::default(),
    )
}

/// Walk from the peak in `direction` until the values drop below `level`;
/// linearly interpolated crossing position.
fn crossing_below(data: &FitData, peak_idx: usize, level: f64, direction: isize) -> Option<f64> {
    let n = data.len() as isize;
    let mut i = peak_idx as isize;
    loop {
        let next = i + direction;
        if next < 0 || next >= n {
            return None;
        }
        let (a, b) = (i as usize, next as usize);
        if data.y[b] < level && data.y[a] >= level {
            let t = (data.y[a] - level) / (data.y[a] - data.y[b]);
            return Some(data.x[a] + t * (data.x[b] - data.x[a]));
        }
        i = next;
    }
}

/// Empty-cavity quantities held fixed in the coupled-transmission fit; all
/// rates angular (rad/s). `resonant_transmission` pins the amplitude of the
/// fit function to the independently measured empty-cavity peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionFixedParams {
    pub cavity_decay: f64,
    pub mirror_decay: f64,
    pub atom_decay: f64,
    pub resonant_transmission: f64,
}

fn coupled_transmission_model(fixed: &TransmissionFixedParams) -> impl Fn(f64, &[f64]) -> f64 + '_ {
    let bare_peak = (2.0 * fixed.mirror_decay / fixed.cavity_decay).powi(2);
    let scale = fixed.resonant_transmission / bare_peak;
    move |x_mhz: f64, p: &[f64]| {
        let sys = CoupledSystem {
            coupling: angular_from_mhz(p[0].max(0.0)),
            cavity_decay: fixed.cavity_decay,
            mirror_decay: fixed.mirror_decay,
            atom_decay: fixed.atom_decay,
            cavity_resonance: angular_from_mhz(p[1]),
            atom_resonance: 0.0,
        };
        scale * sys.transmission(angular_from_mhz(x_mhz))
    }
}

/// Fit the coupled transmission spectrum with exactly two free parameters,
/// `g0_mhz` (bounded >= 0) and the cavity-atom offset `offset_mhz`.
///
/// Frequencies in `spectrum` are detunings from the atomic resonance.
pub fn fit_coupled_transmission(
    spectrum: &Spectrum,
    fixed: &TransmissionFixedParams,
) -> Result<FitResult, FitError> {
    let data = spectrum_data(spectrum);
    let model = coupled_transmission_model(fixed);

    let offset0 = half_level_midpoint(&data);
    // Dip depth at the atomic line inverted through the cooperativity
    // relation T(0)/T_max = (1 + g0^2/(kappa gamma))^-2.
    let idx0 = nearest_index(&data.x, 0.0);
    let kappa_gamma =
        mhz_from_angular(fixed.cavity_decay) * mhz_from_angular(fixed.atom_decay);
    let dip = data.y[idx0].max(f64::MIN_POSITIVE);
    let ratio = fixed.resonant_transmission / dip;
    let dip_guess = if ratio > 1.0 {
        (kappa_gamma * (ratio.sqrt() - 1.0)).sqrt()
    } else {
        0.0
    };
    // Rank a few coupling scales by initial cost; keeps the start point
    // robust for both deep-dip and near-null data.
    let scale = kappa_gamma.sqrt();
    let g0_candidates = [dip_guess, 0.25 * scale, 0.5 * scale, scale, 2.0 * scale];
    let g0_start = best_candidate(&data, &model, &g0_candidates, &|g0| vec![g0, offset0]);

    least_squares(
        model,
        &data,
        &[g0_start, offset0],
        Some(&[NON_NEGATIVE, UNBOUNDED]),
        &["g0_mhz", "offset_mhz"],
        &FitSettings::default(),
    )
}

/// Empty-cavity rates held fixed in the coupled-reflection fit (rad/s).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionFixedParams {
    pub cavity_decay: f64,
    pub mirror_decay: f64,
    pub atom_decay: f64,
}

fn coupled_reflection_model(fixed: &ReflectionFixedParams) -> impl Fn(f64, &[f64]) -> f64 + '_ {
    // R(omega -> inf) = 1, so far_reflection multiplies R directly.
    move |x_mhz: f64, p: &[f64]| {
        let sys = CoupledSystem {
            coupling: angular_from_mhz(p[0].max(0.0)),
            cavity_decay: fixed.cavity_decay,
            mirror_decay: fixed.mirror_decay,
            atom_decay: fixed.atom_decay,
            cavity_resonance: angular_from_mhz(p[1]),
            atom_resonance: 0.0,
        };
        p[2] * sys.reflection(angular_from_mhz(x_mhz))
    }
}

/// Fit the coupled reflection spectrum with three free parameters:
/// `g0_mhz` (>= 0), `offset_mhz`, and `far_reflection`, the reflected power
/// far away from the atom/cavity resonance.
pub fn fit_coupled_reflection(
    spectrum: &Spectrum,
    fixed: &ReflectionFixedParams,
) -> Result<FitResult, FitError> {
    let data = spectrum_data(spectrum);
    let model = coupled_reflection_model(fixed);
    let n = data.len();

    let edge = (n / 10).clamp(1, 5);
    let far0 = 0.5
        * (data.y[..edge].iter().sum::<f64>() / edge as f64
            + data.y[n - edge..].iter().sum::<f64>() / edge as f64);
    let dip_idx = data
        .y
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let offset0 = data.x[dip_idx];
    let kappa_gamma =
        mhz_from_angular(fixed.cavity_decay) * mhz_from_angular(fixed.atom_decay);
    let scale = kappa_gamma.sqrt();
    let g0_candidates = [0.0, 0.25 * scale, 0.5 * scale, scale, 2.0 * scale];
    let far0 = far0.max(1e-6);
    let g0_start = best_candidate(&data, &model, &g0_candidates, &|g0| {
        vec![g0, offset0, far0]
    });

    least_squares(
        model,
        &data,
        &[g0_start, offset0, far0],
        Some(&[NON_NEGATIVE, UNBOUNDED, POSITIVE]),
        &["g0_mhz", "offset_mhz", "far_reflection"],
        &FitSettings::default(),
    )
}

/// One point of a trap-lifetime survival measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalPoint {
    /// Waiting time tau (s).
    pub delay: f64,
    /// Fraction of trials in which the atom survived.
    pub probability: f64,
    /// Number of trials behind the fraction.
    pub trials: u64,
}

/// Fit p(tau) = p0 exp(-tau/t0) with binomial weights
/// sigma = sqrt(p(1-p)/n), floored at 1/(2n) where p hits 0 or 1.
///
/// Parameters: `t0_ms`, `p0`.
pub fn fit_exponential_decay(points: &[SurvivalPoint]) -> Result<FitResult, FitError> {
    let mut delays: Vec<f64> = points.iter().map(|p| p.delay).collect();
    delays.sort_by(f64::total_cmp);
    delays.dedup();
    if delays.len() < 3 {
        return Err(FitError::TooFewPoints {
            points: delays.len(),
            parameters: 3,
        });
    }
    for p in points {
        if !(0.0..=1.0).contains(&p.probability) || p.trials == 0 {
            return Err(FitError::DegenerateData(format!(
                "invalid survival point: p = {}, trials = {}",
                p.probability, p.trials
            )));
        }
    }
    if points.iter().all(|p| p.probability == 1.0) {
        return Err(FitError::UnidentifiableLifetime(
            "every trial survived at every delay".into(),
        ));
    }
    if points.iter().all(|p| p.probability == 0.0) {
        return Err(FitError::UnidentifiableLifetime(
            "no trial survived at any delay".into(),
        ));
    }

    let x: Vec<f64> = points.iter().map(|p| p.delay * 1e3).collect();
    let y: Vec<f64> = points.iter().map(|p| p.probability).collect();
    let sigma: Vec<f64> = points
        .iter()
        .map(|p| {
            let n = p.trials as f64;
            (p.probability * (1.0 - p.probability) / n)
                .sqrt()
                .max(1.0 / (2.0 * n))
        })
        .collect();
    let data = FitData { x, y, sigma };

    // Log-line regression over the strictly positive points seeds t0.
    let logs: Vec<(f64, f64)> = data
        .x
        .iter()
        .zip(&data.y)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x, y.ln()))
        .collect();
    let t0_guess = if logs.len() >= 2 {
        let n = logs.len() as f64;
        let sx: f64 = logs.iter().map(|(x, _)| x).sum();
        let sy: f64 = logs.iter().map(|(_, y)| y).sum();
        let sxx: f64 = logs.iter().map(|(x, _)| x * x).sum();
        let sxy: f64 = logs.iter().map(|(x, y)| x * y).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        if slope < 0.0 {
            -1.0 / slope
        } else {
            data.x[data.x.len() - 1] - data.x[0]
        }
    } else {
        0.5 * (data.x[0] + data.x[data.x.len() - 1])
    };
    let p0_guess = data.y.iter().cloned().fold(0.0_f64, f64::max).max(0.1);

    least_squares(
        |x, p: &[f64]| p[1] * (-x / p[0]).exp(),
        &data,
        &[t0_guess, p0_guess],
        Some(&[POSITIVE, POSITIVE]),
        &["t0_ms", "p0"],
        &FitSettings::default(),
    )
}

/// Midpoint of the outermost half-level crossings; a robust stand-in for
/// the center of a broad peak.
fn half_level_midpoint(data: &FitData) -> f64 {
    let n = data.len();
    let y_min = data.y.iter().cloned().fold(f64::INFINITY, f64::min);
    let y_max = data.y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let level = 0.5 * (y_min + y_max);
    let mut left = data.x[0];
    for i in 0..n {
        if data.y[i] >= level {
            left = data.x[i];
            break;
        }
    }
    let mut right = data.x[n - 1];
    for i in (0..n).rev() {
        if data.y[i] >= level {
            right = data.x[i];
            break;
        }
    }
    0.5 * (left + right)
}

fn nearest_index(xs: &[f64], target: f64) -> usize {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        let d = (x - target).abs();
        if d < best_dist {
            best_dist = d;
            best = i;
        }
    }
    best
}

/// Initial cost of each candidate parameter vector; returns the candidate
/// value with the lowest cost. Deterministic tie-break: first wins.
fn best_candidate<F: Fn(f64, &[f64]) -> f64>(
    data: &FitData,
    model: &F,
    candidates: &[f64],
    build: &dyn Fn(f64) -> Vec<f64>,
) -> f64 {
    let cost = |p: &[f64]| -> f64 {
        data.x
            .iter()
            .zip(&data.y)
            .zip(&data.sigma)
            .map(|((&x, &y), &s)| {
                let r = (model(x, p) - y) / s;
                r * r
            })
            .sum()
    };
    let mut best = candidates[0];
    let mut best_cost = f64::INFINITY;
    for &c in candidates {
        let value = cost(&build(c));
        if value.is_finite() && value < best_cost {
            best_cost = value;
            best = c;
        }
    }
    best
}
