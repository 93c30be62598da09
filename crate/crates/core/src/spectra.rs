//! Steady-state weak-drive transmission and reflection of the coupled
//! atom-cavity system, the empty-cavity Lorentzian limit, and normal-mode
//! structure.
//!
//! With detunings Delta_c = omega - omega_c and Delta_a = omega - omega_a,
//! the field response of the driven cavity is
//!
//!   t(omega) = 2 kappa_T (i Delta_a + gamma)
//!              / ((i Delta_c + kappa)(i Delta_a + gamma) + g0^2)
//!
//! and the intensity coefficients are T = |t|^2, R = |1 - t|^2. The factor 2
//! on kappa_T makes a lossless symmetric cavity transmit unity on resonance,
//! closing the algebra against the loss-budget identities
//! T_max = (2 kappa_T/kappa)^2 and 1 - eta = (1 - 2 kappa_T/kappa)^2.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectraError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("coupling must be non-negative, got {value}")]
    NegativeCoupling { value: f64 },
    #[error("mirror decay too large: 2 kappa_T = {two_kappa_t} exceeds kappa = {kappa}")]
    MirrorDecayExceedsTotal { two_kappa_t: f64, kappa: f64 },
    #[error("spectrum frequencies must be strictly increasing (violated at index {index})")]
    UnorderedFrequencies { index: usize },
    #[error("spectrum values must be non-negative (index {index}: {value})")]
    NegativeValue { index: usize, value: f64 },
    #[error("spectrum sigmas must be positive (index {index}: {sigma})")]
    NonPositiveSigma { index: usize, sigma: f64 },
    #[error("spectrum must contain at least one point")]
    Empty,
}

/// A single atom coupled to a single cavity mode, plus the drive geometry.
/// All rates and frequencies are angular (rad/s). `coupling = 0` encodes the
/// empty cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledSystem {
    /// Atom-cavity coupling rate g0 (rad/s), >= 0.
    pub coupling: f64,
    /// Total cavity field decay rate kappa (rad/s).
    pub cavity_decay: f64,
    /// Field decay rate through each mirror kappa_T (rad/s), 2 kappa_T <= kappa.
    pub mirror_decay: f64,
    /// Atomic dipole decay rate gamma (rad/s).
    pub atom_decay: f64,
    /// Cavity resonance omega_c (rad/s).
    pub cavity_resonance: f64,
    /// Atomic resonance omega_a (rad/s).
    pub atom_resonance: f64,
}

impl CoupledSystem {
    pub fn new(
        coupling: f64,
        cavity_decay: f64,
        mirror_decay: f64,
        atom_decay: f64,
        cavity_resonance: f64,
        atom_resonance: f64,
    ) -> Result<Self, SpectraError> {
        if coupling < 0.0 || !coupling.is_finite() {
            return Err(SpectraError::NegativeCoupling { value: coupling });
        }
        check_positive("cavity_decay", cavity_decay)?;
        check_positive("mirror_decay", mirror_decay)?;
        check_positive("atom_decay", atom_decay)?;
        if 2.0 * mirror_decay > cavity_decay {
            return Err(SpectraError::MirrorDecayExceedsTotal {
                two_kappa_t: 2.0 * mirror_decay,
                kappa: cavity_decay,
            });
        }
        Ok(Self {
            coupling,
            cavity_decay,
            mirror_decay,
            atom_decay,
            cavity_resonance,
            atom_resonance,
        })
    }

    /// Frequency offset omega_off = omega_c - omega_a (rad/s).
    pub fn frequency_offset(&self) -> f64 {
        self.cavity_resonance - self.atom_resonance
    }

    /// The same system with the atom removed (g0 = 0).
    pub fn empty(&self) -> Self {
        Self {
            coupling: 0.0,
            ..*self
        }
    }

    /// Complex field transmission amplitude t(omega).
    fn response(&self, omega: f64) -> Complex64 {
        let delta_c = Complex64::new(0.0, omega - self.cavity_resonance);
        let delta_a = Complex64::new(0.0, omega - self.atom_resonance);
        let atom = delta_a + self.atom_decay;
        let cavity = delta_c + self.cavity_decay;
        2.0 * self.mirror_decay * atom / (cavity * atom + self.coupling * self.coupling)
    }

    /// Intensity transmission T(omega) in [0, 1].
    pub fn transmission(&self, omega: f64) -> f64 {
        self.response(omega).norm_sqr()
    }

    /// Intensity reflection R(omega) in [0, 1].
    pub fn reflection(&self, omega: f64) -> f64 {
        (Complex64::ONE - self.response(omega)).norm_sqr()
    }

    /// The two complex eigenfrequencies of the coupled system: real part is
    /// the resonance position, imaginary part the half-width.
    ///
    /// These are the roots of (i Delta_c + kappa)(i Delta_a + gamma) + g0^2
    /// viewed in omega, i.e. of (omega - z_c)(omega - z_a) = g0^2 with
    /// z_c = omega_c + i kappa and z_a = omega_a + i gamma. Sorted by real
    /// part.
    pub fn normal_mode_frequencies(&self) -> [Complex64; 2] {
        let z_c = Complex64::new(self.cavity_resonance, self.cavity_decay);
        let z_a = Complex64::new(self.atom_resonance, self.atom_decay);
        let mean = 0.5 * (z_c + z_a);
        let half_diff = 0.5 * (z_c - z_a);
        let root = (half_diff * half_diff + self.coupling * self.coupling).sqrt();
        let (a, b) = (mean - root, mean + root);
        if a.re <= b.re {
            [a, b]
        } else {
            [b, a]
        }
    }

    /// Normal-mode splitting: the difference of the two eigenfrequency real
    /// parts (rad/s). Zero in the unresolved ("onset") regime, where the
    /// roots differ only in width.
    pub fn normal_mode_splitting(&self) -> f64 {
        let [lower, upper] = self.normal_mode_frequencies();
        upper.re - lower.re
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<(), SpectraError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(SpectraError::NonPositive { name, value });
    }
    Ok(())
}

/// One sample of a measured or synthetic spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPoint {
    /// Angular frequency (rad/s); for coupled-spectrum data this is the
    /// detuning from the atomic resonance.
    pub frequency: f64,
    /// Dimensionless intensity fraction.
    pub value: f64,
    /// Optional one-sigma uncertainty on the value.
    pub sigma: Option<f64>,
}

/// Ordered (frequency, value, uncertainty) samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    points: Vec<SpectrumPoint>,
}

impl Spectrum {
    pub fn new(points: Vec<SpectrumPoint>) -> Result<Self, SpectraError> {
        if points.is_empty() {
            return Err(SpectraError::Empty);
        }
        for (i, p) in points.iter().enumerate() {
            if i > 0 && p.frequency <= points[i - 1].frequency {
                return Err(SpectraError::UnorderedFrequencies { index: i });
            }
            if p.value < 0.0 || !p.value.is_finite() {
                return Err(SpectraError::NegativeValue {
                    index: i,
                    value: p.value,
                });
            }
            if let Some(sigma) = p.sigma {
                if !(sigma > 0.0) {
                    return Err(SpectraError::NonPositiveSigma { index: i, sigma });
                }
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[SpectrumPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SpectrumPoint> {
        self.points.iter()
    }
}

/// Which intensity coefficient to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Transmission,
    Reflection,
}

/// Overlay photon-counting shot noise on a spectrum.
///
/// Each value v is replaced by k/N with k ~ Poisson(v N), where
/// N = `counts_at_unity` is the number of detected events a value of 1.0
/// would produce; the per-point sigma becomes sqrt(max(k, 1))/N. Fully
/// determined by the seed.
pub fn with_poisson_counting_noise(
    spectrum: &Spectrum,
    counts_at_unity: f64,
    seed: u64,
) -> Result<Spectrum, SpectraError> {
    use rand::SeedableRng;
    use rand_distr::Distribution;

    if !(counts_at_unity > 0.0) {
        return Err(SpectraError::NonPositive {
            name: "counts_at_unity",
            value: counts_at_unity,
        });
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let points = spectrum
        .iter()
        .map(|p| {
            let mean = p.value * counts_at_unity;
            let k = if mean > 0.0 {
                rand_distr::Poisson::new(mean)
                    .expect("positive mean")
                    .sample(&mut rng)
            } else {
                0.0
            };
            SpectrumPoint {
                frequency: p.frequency,
                value: k / counts_at_unity,
                sigma: Some(k.max(1.0).sqrt() / counts_at_unity),
            }
        })
        .collect();
    Spectrum::new(points)
}

/// Evaluate the system pointwise on a strictly increasing frequency grid.
pub fn sample_spectrum(
    sys: &CoupledSystem,
    grid: &[f64],
    kind: SpectrumKind,
) -> Result<Spectrum, SpectraError> {
    let points = grid
        .iter()
        .map(|&omega| SpectrumPoint {
            frequency: omega,
            value: match kind {
                SpectrumKind::Transmission => sys.transmission(omega),
                SpectrumKind::Reflection => sys.reflection(omega),
            },
            sigma: None,
        })
        .collect();
    Spectrum::new(points)
}
