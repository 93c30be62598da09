//! Resonator geometry: stability, mode spacing, waist, mode volume, length
//! determination, ideal atom-cavity coupling, and the concentric-approach
//! sweep.
//!
//! Every operation is pure. Lengths are meters, frequencies returned as
//! ordinary Hz unless the name says otherwise; coupling rates are angular
//! (rad/s) like all internal rates.

use std::f64::consts::PI;

use thiserror::Error;

use crate::constants::{RB87_D2_DIPOLE_DECAY, RB87_D2_WAVELENGTH, SPEED_OF_LIGHT as C};
use crate::solve::{bisect, SolveError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("unstable geometry: stability parameter g = {g} has g^2 > 1")]
    Unstable { g: f64 },
    #[error("singular geometry: g = {g} sits exactly on the stability boundary, waist undefined")]
    Singular { g: f64 },
    #[error("mode spacing {spacing_hz} Hz has no cavity-length solution on the {branch:?} branch of R_C = {radius} m")]
    NoRoot {
        spacing_hz: f64,
        radius: f64,
        branch: Branch,
    },
    #[error("resonance frequencies are degenerate (nu_a = nu_b = {nu} Hz)")]
    DegenerateResonances { nu: f64 },
    #[error("nu_a ({nu_a} Hz) must exceed nu_b ({nu_b} Hz)")]
    UnorderedResonances { nu_a: f64, nu_b: f64 },
    #[error("longitudinal mode difference must be >= 1")]
    ZeroModeDifference,
    #[error("sweep range [{d_min}, {d_max}] m must satisfy 0 < d_min <= d_max < R_C")]
    InvalidSweepRange { d_min: f64, d_max: f64 },
    #[error("sweep needs at least one point")]
    EmptySweep,
    #[error("target ratio {target} not crossed inside [{d_min}, {d_max}] m (ratio spans [{ratio_at_max}, {ratio_at_min}])")]
    TargetUnreachable {
        target: f64,
        d_min: f64,
        d_max: f64,
        ratio_at_min: f64,
        ratio_at_max: f64,
    },
    #[error("root finding failed: {0}")]
    Solve(#[from] SolveError),
}

/// Two-level atom reduced to the two numbers the coupled system needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomModel {
    /// Dipole (field) decay rate gamma (rad/s), half the natural linewidth.
    pub dipole_decay_rate: f64,
    /// Transition wavelength (m).
    pub transition_wavelength: f64,
}

impl AtomModel {
    pub fn new(dipole_decay_rate: f64, transition_wavelength: f64) -> Result<Self, GeometryError> {
        check_positive("dipole_decay_rate", dipole_decay_rate)?;
        check_positive("transition_wavelength", transition_wavelength)?;
        Ok(Self {
            dipole_decay_rate,
            transition_wavelength,
        })
    }

    /// Rb-87 D2 line: natural linewidth 2*pi*6.07 MHz, lambda = 780.241 nm.
    pub fn rubidium_d2() -> Self {
        Self {
            dipole_decay_rate: RB87_D2_DIPOLE_DECAY,
            transition_wavelength: RB87_D2_WAVELENGTH,
        }
    }

    /// Transition angular frequency omega_a = 2*pi*c/lambda (rad/s).
    pub fn transition_frequency(&self) -> f64 {
        2.0 * PI * C / self.transition_wavelength
    }
}

impl Default for AtomModel {
    fn default() -> Self {
        Self::rubidium_d2()
    }
}

/// Symmetric two-mirror resonator.
///
/// Out-of-range geometries (g^2 > 1) are representable; operations that need
/// a confined mode reject them with [`GeometryError::Unstable`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityGeometry {
    /// Mirror radius of curvature R_C (m).
    pub radius_of_curvature: f64,
    /// Mirror separation l_cav (m).
    pub cavity_length: f64,
    /// Mode wavelength (m).
    pub wavelength: f64,
}

/// Derived mode quantities for a stable geometry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeProperties {
    pub stability_g: f64,
    /// Beam waist w0 at the cavity center (m).
    pub waist: f64,
    /// Effective mode volume V (m^3).
    pub mode_volume: f64,
    /// Free spectral range c/2l (Hz).
    pub free_spectral_range: f64,
    /// Fundamental-to-first-transverse mode spacing (Hz).
    pub transverse_mode_spacing: f64,
    /// Distance to the concentric point, d = 2 R_C - l_cav (m).
    pub distance_to_concentric: f64,
}

impl CavityGeometry {
    pub fn new(
        radius_of_curvature: f64,
        cavity_length: f64,
        wavelength: f64,
    ) -> Result<Self, GeometryError> {
        check_positive("radius_of_curvature", radius_of_curvature)?;
        check_positive("cavity_length", cavity_length)?;
        check_positive("wavelength", wavelength)?;
        Ok(Self {
            radius_of_curvature,
            cavity_length,
            wavelength,
        })
    }

    /// Build a near-concentric geometry from the distance to the concentric
    /// point, l_cav = 2 R_C - d.
    pub fn near_concentric(
        radius_of_curvature: f64,
        distance_to_concentric: f64,
        wavelength: f64,
    ) -> Result<Self, GeometryError> {
        check_positive("distance_to_concentric", distance_to_concentric)?;
        Self::new(
            radius_of_curvature,
            2.0 * radius_of_curvature - distance_to_concentric,
            wavelength,
        )
    }

    /// Stability parameter g = 1 - l_cav/R_C.
    pub fn stability_parameter(&self) -> f64 {
        1.0 - self.cavity_length / self.radius_of_curvature
    }

    /// A confined mode exists iff 0 <= g^2 <= 1.
    pub fn is_stable(&self) -> bool {
        self.stability_parameter().powi(2) <= 1.0
    }

    /// d = 2 R_C - l_cav (m); positive on the near-concentric side.
    pub fn distance_to_concentric(&self) -> f64 {
        2.0 * self.radius_of_curvature - self.cavity_length
    }

    /// Free spectral range c/2l (Hz).
    pub fn free_spectral_range(&self) -> f64 {
        C / (2.0 * self.cavity_length)
    }

    /// Spacing between the fundamental and the first adjacent transverse
    /// mode, (c/2l)(1 - acos(g)/pi) (Hz).
    ///
    /// Zero at the concentric point, FSR/2 at the confocal point.
    pub fn transverse_mode_spacing(&self) -> Result<f64, GeometryError> {
        let g = self.stability_parameter();
        if g * g > 1.0 {
            return Err(GeometryError::Unstable { g });
        }
        Ok(self.free_spectral_range() * (1.0 - g.acos() / PI))
    }

    /// Beam waist w0 = sqrt(lambda l / 2 pi) [(1+g)/(1-g)]^(1/4) (m).
    ///
    /// Undefined on the stability boundary: exactly concentric or planar
    /// geometries return [`GeometryError::Singular`].
    pub fn waist(&self) -> Result<f64, GeometryError> {
        let g = self.stability_parameter();
        if g * g > 1.0 {
            return Err(GeometryError::Unstable { g });
        }
        if g * g == 1.0 {
            return Err(GeometryError::Singular { g });
        }
        let bracket = (1.0 + g) / (1.0 - g);
        Ok((self.wavelength * self.cavity_length / (2.0 * PI)).sqrt() * bracket.powf(0.25))
    }

    /// Effective volume of the standing-wave Gaussian fundamental mode,
    /// V = (pi/4) w0^2 l_cav (m^3).
    pub fn mode_volume(&self) -> Result<f64, GeometryError> {
        let w0 = self.waist()?;
        Ok(PI / 4.0 * w0 * w0 * self.cavity_length)
    }

    /// Ideal single-atom coupling g0 = sqrt(3 lambda_a^2 c gamma / (4 pi V))
    /// (rad/s) for a clean two-level atom, using the atom's transition
    /// wavelength.
    pub fn ideal_coupling(&self, atom: &AtomModel) -> Result<f64, GeometryError> {
        let volume = self.mode_volume()?;
        let lambda = atom.transition_wavelength;
        Ok((3.0 * lambda * lambda * C * atom.dipole_decay_rate / (4.0 * PI * volume)).sqrt())
    }

    /// All derived mode quantities at once.
    pub fn mode_properties(&self) -> Result<ModeProperties, GeometryError> {
        Ok(ModeProperties {
            stability_g: self.stability_parameter(),
            waist: self.waist()?,
            mode_volume: self.mode_volume()?,
            free_spectral_range: self.free_spectral_range(),
            transverse_mode_spacing: self.transverse_mode_spacing()?,
            distance_to_concentric: self.distance_to_concentric(),
        })
    }
}

/// Which of the two cavity lengths reproduces a given transverse mode
/// spacing: the marginally stable branch near l = 2 R_C, or its near-planar
/// mirror image below l = R_C.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    NearConcentric,
    NearPlanar,
}

/// Invert the transverse-mode-spacing relation to a cavity length (m).
///
/// On the near-concentric branch the spacing decreases monotonically from
/// c/4R_C (confocal) to zero (concentric), so a bracketed bisection on
/// l in (R_C, 2 R_C) finds the unique solution to relative 1e-12.
pub fn length_from_mode_spacing(
    spacing_hz: f64,
    radius_of_curvature: f64,
    branch: Branch,
) -> Result<f64, GeometryError> {
    check_positive("radius_of_curvature", radius_of_curvature)?;
    let no_root = || GeometryError::NoRoot {
        spacing_hz,
        radius: radius_of_curvature,
        branch,
    };
    let confocal_spacing = C / (4.0 * radius_of_curvature);
    let spacing_at = |l: f64| -> f64 {
        CavityGeometry {
            radius_of_curvature,
            cavity_length: l,
            wavelength: 1.0, // unused by the spacing
        }
        .transverse_mode_spacing()
        .expect("bracket stays inside the stability range")
    };
    let (lo, hi) = match branch {
        Branch::NearConcentric => {
            if spacing_hz <= 0.0 || spacing_hz >= confocal_spacing {
                return Err(no_root());
            }
            (radius_of_curvature, 2.0 * radius_of_curvature)
        }
        Branch::NearPlanar => {
            if spacing_hz <= confocal_spacing {
                return Err(no_root());
            }
            (radius_of_curvature * 1e-12, radius_of_curvature)
        }
    };
    // Shrink to representable interior endpoints; spacing is monotone on
    // each branch so the sign change survives as long as the target is
    // attainable there.
    let lo = lo + lo.abs() * 1e-15;
    let hi = hi - hi.abs() * 1e-15;
    if (spacing_at(lo) - spacing_hz).signum() == (spacing_at(hi) - spacing_hz).signum() {
        return Err(no_root());
    }
    Ok(bisect(|l| spacing_at(l) - spacing_hz, lo, hi, 1e-12)?)
}

/// Cavity length from two simultaneously resonant fields,
/// l_cav = c dn / (2 (nu_a - nu_b)) (inputs in Hz, result in m).
pub fn length_from_dual_resonance(
    nu_a: f64,
    nu_b: f64,
    delta_n: u32,
) -> Result<f64, GeometryError> {
    if delta_n == 0 {
        return Err(GeometryError::ZeroModeDifference);
    }
    if nu_a == nu_b {
        return Err(GeometryError::DegenerateResonances { nu: nu_a });
    }
    if nu_a < nu_b {
        return Err(GeometryError::UnorderedResonances { nu_a, nu_b });
    }
    Ok(C * f64::from(delta_n) / (2.0 * (nu_a - nu_b)))
}

/// How the sweep turns a distance-to-concentric into a coupling rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CouplingCalibration {
    /// The ideal-coupling formula evaluated on the swept geometry.
    Ideal,
    /// A measured coupling pinned at one distance and scaled by the
    /// near-concentric fourth-root law g0 ~ d^(-1/4).
    Measured {
        /// Coupling (rad/s) observed at `anchor_distance`.
        anchor_coupling: f64,
        /// Distance to concentric (m) where the anchor was taken.
        anchor_distance: f64,
    },
}

impl CouplingCalibration {
    /// Anchor used by the measured calibration by default: 2*pi*5.0 MHz
    /// observed at d = 1.65 um with a linearly polarized probe on an
    /// unpolarized atom, upgraded by the Clebsch-Gordan factor sqrt(2) a
    /// circularly polarized cycling transition would gain.
    pub fn measured_default() -> Self {
        CouplingCalibration::Measured {
            anchor_coupling: 2.0 * PI * 5.0e6 * 2.0_f64.sqrt(),
            anchor_distance: 1.65e-6,
        }
    }

    fn coupling_at(
        &self,
        radius_of_curvature: f64,
        wavelength: f64,
        atom: &AtomModel,
        distance: f64,
    ) -> Result<f64, GeometryError> {
        match *self {
            CouplingCalibration::Ideal => {
                CavityGeometry::near_concentric(radius_of_curvature, distance, wavelength)?
                    .ideal_coupling(atom)
            }
            CouplingCalibration::Measured {
                anchor_coupling,
                anchor_distance,
            } => Ok(anchor_coupling * (anchor_distance / distance).powf(0.25)),
        }
    }
}

/// One sampled point of the concentric-approach sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    /// Distance to the concentric point (m).
    pub distance: f64,
    /// Coupling rate g0 (rad/s) under the chosen calibration.
    pub coupling: f64,
    /// g0 / gamma.
    pub coupling_ratio: f64,
    /// Beam waist (m).
    pub waist: f64,
}

/// Sample coupling and waist log-uniformly in the distance to concentric.
pub fn concentric_sweep(
    radius_of_curvature: f64,
    wavelength: f64,
    atom: &AtomModel,
    d_min: f64,
    d_max: f64,
    n_points: usize,
    calibration: CouplingCalibration,
) -> Result<Vec<SweepRow>, GeometryError> {
    check_sweep_range(radius_of_curvature, d_min, d_max)?;
    if n_points == 0 {
        return Err(GeometryError::EmptySweep);
    }
    let mut rows = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let frac = if n_points == 1 {
            0.0
        } else {
            i as f64 / (n_points - 1) as f64
        };
        let d = d_min * (d_max / d_min).powf(frac);
        let coupling = calibration.coupling_at(radius_of_curvature, wavelength, atom, d)?;
        let waist =
            CavityGeometry::near_concentric(radius_of_curvature, d, wavelength)?.waist()?;
        rows.push(SweepRow {
            distance: d,
            coupling,
            coupling_ratio: coupling / atom.dipole_decay_rate,
            waist,
        });
    }
    Ok(rows)
}

/// Distance to concentric (m) at which g0/gamma crosses `target_ratio`.
///
/// The ratio is strictly decreasing in d on both calibrations, so the
/// crossing is bracketed and bisected to relative 1e-6. A target equal to
/// the ratio at either edge returns that edge.
pub fn solve_coupling_target(
    radius_of_curvature: f64,
    wavelength: f64,
    atom: &AtomModel,
    target_ratio: f64,
    d_min: f64,
    d_max: f64,
    calibration: CouplingCalibration,
) -> Result<f64, GeometryError> {
    check_sweep_range(radius_of_curvature, d_min, d_max)?;
    let ratio = |d: f64| -> Result<f64, GeometryError> {
        Ok(calibration.coupling_at(radius_of_curvature, wavelength, atom, d)?
            / atom.dipole_decay_rate)
    };
    let ratio_at_min = ratio(d_min)?;
    let ratio_at_max = ratio(d_max)?;
    if target_ratio == ratio_at_min {
        return Ok(d_min);
    }
    if target_ratio == ratio_at_max {
        return Ok(d_max);
    }
    if target_ratio > ratio_at_min || target_ratio < ratio_at_max {
        return Err(GeometryError::TargetUnreachable {
            target: target_ratio,
            d_min,
            d_max,
            ratio_at_min,
            ratio_at_max,
        });
    }
    let f = |d: f64| ratio(d).expect("range already validated") - target_ratio;
    Ok(bisect(f, d_min, d_max, 1e-6)?)
}

fn check_sweep_range(radius: f64, d_min: f64, d_max: f64) -> Result<(), GeometryError> {
    check_positive("radius_of_curvature", radius)?;
    if !(d_min > 0.0 && d_min <= d_max && d_max < radius) {
        return Err(GeometryError::InvalidSweepRange { d_min, d_max });
    }
    Ok(())
}

fn check_positive(name: &'static str, value: f64) -> Result<(), GeometryError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(GeometryError::NonPositive { name, value });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const R_C: f64 = 5.5e-3;

    fn paper_geometry(distance: f64) -> CavityGeometry {
        CavityGeometry::near_concentric(R_C, distance, RB87_D2_WAVELENGTH).unwrap()
    }

    #[test]
    fn stability_concentric_limit() {
        let geom = CavityGeometry::new(R_C, 2.0 * R_C, 780e-9).unwrap();
        assert_eq!(geom.stability_parameter(), -1.0);
    }

    #[test]
    fn stability_midpoint() {
        let geom = CavityGeometry::new(R_C, R_C, 780e-9).unwrap();
        assert_eq!(geom.stability_parameter(), 0.0);
    }

    #[test]
    fn stability_near_concentric_value() {
        // d = 1.65 um off concentric: g = -0.9997 exactly.
        let g = paper_geometry(1.65e-6).stability_parameter();
        assert_relative_eq!(g, -0.9997, max_relative = 1e-12);
    }

    #[test]
    fn rejects_non_positive_inputs() {
        assert!(CavityGeometry::new(0.0, 1.0, 780e-9).is_err());
        assert!(CavityGeometry::new(1.0, -1.0, 780e-9).is_err());
        assert!(AtomModel::new(-1.0, 780e-9).is_err());
    }

    #[test]
    fn mode_spacing_confocal() {
        let geom = CavityGeometry::new(R_C, R_C, 780e-9).unwrap();
        let spacing = geom.transverse_mode_spacing().unwrap();
        assert_relative_eq!(spacing, C / (4.0 * R_C), max_relative = 1e-14);
        assert_relative_eq!(
            spacing,
            geom.free_spectral_range() / 2.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn mode_spacing_near_concentric() {
        // 1.7 um off concentric: 107.87 MHz, inside the measured 109(2) MHz band.
        let spacing = paper_geometry(1.7e-6).transverse_mode_spacing().unwrap();
        assert_relative_eq!(spacing, 107.866e6, max_relative = 1e-4);
        assert!(spacing > 107e6 && spacing < 111e6);
    }

    #[test]
    fn mode_spacing_vanishes_at_concentricity() {
        let geom = CavityGeometry::new(R_C, 2.0 * R_C, 780e-9).unwrap();
        assert_eq!(geom.transverse_mode_spacing().unwrap(), 0.0);
    }

    #[test]
    fn mode_spacing_rejects_unstable() {
        let geom = CavityGeometry::new(R_C, 2.0 * R_C + 1e-6, 780e-9).unwrap();
        assert!(matches!(
            geom.transverse_mode_spacing(),
            Err(GeometryError::Unstable { .. })
        ));
    }

    #[test]
    fn length_inversion_reproduces_measurement() {
        // 109 MHz measured spacing -> l = 2 R_C - 1.7(1) um.
        let l = length_from_mode_spacing(109e6, R_C, Branch::NearConcentric).unwrap();
        let d = 2.0 * R_C - l;
        assert_relative_eq!(d, 1.7359e-6, max_relative = 1e-4);
        assert!(d > 1.6e-6 && d < 1.8e-6);
    }

    #[test]
    fn length_inversion_round_trip() {
        for d in [10e-9, 100e-9, 1.65e-6, 50e-6, 1e-3, 4e-3] {
            let geom = paper_geometry(d);
            let spacing = geom.transverse_mode_spacing().unwrap();
            let l = length_from_mode_spacing(spacing, R_C, Branch::NearConcentric).unwrap();
            assert_relative_eq!(l, geom.cavity_length, max_relative = 1e-9);
        }
    }

    #[test]
    fn length_inversion_at_200_mhz() {
        let l = length_from_mode_spacing(200e6, R_C, Branch::NearConcentric).unwrap();
        assert_relative_eq!(2.0 * R_C - l, 5.8393e-6, max_relative = 1e-4);
        // Forward evaluation closes the loop.
        let spacing = CavityGeometry::new(R_C, l, 780e-9)
            .unwrap()
            .transverse_mode_spacing()
            .unwrap();
        assert_relative_eq!(spacing, 200e6, max_relative = 1e-9);
    }

    #[test]
    fn length_inversion_near_planar_branch() {
        let geom = CavityGeometry::new(R_C, 0.3 * R_C, 780e-9).unwrap();
        let spacing = geom.transverse_mode_spacing().unwrap();
        let l = length_from_mode_spacing(spacing, R_C, Branch::NearPlanar).unwrap();
        assert_relative_eq!(l, geom.cavity_length, max_relative = 1e-9);
    }

    #[test]
    fn length_inversion_rejects_unattainable_spacing() {
        // Above the confocal spacing there is no near-concentric solution.
        assert!(matches!(
            length_from_mode_spacing(C / (4.0 * R_C) * 1.01, R_C, Branch::NearConcentric),
            Err(GeometryError::NoRoot { .. })
        ));
        assert!(matches!(
            length_from_mode_spacing(0.0, R_C, Branch::NearConcentric),
            Err(GeometryError::NoRoot { .. })
        ));
    }

    #[test]
    fn dual_resonance_single_fsr() {
        // Two fields one FSR of an 11 mm cavity apart.
        let fsr = C / (2.0 * 11.0e-3);
        let l = length_from_dual_resonance(3.8e14 + fsr, 3.8e14, 1).unwrap();
        assert_relative_eq!(l, 11.0e-3, max_relative = 1e-9);
    }

    #[test]
    fn dual_resonance_paper_instance() {
        // dn = 1043 with the frequency difference that yields l = 2 R_C - 1.65 um.
        let nu_diff = 14.21502014820405e12;
        let l = length_from_dual_resonance(3.843e14, 3.843e14 - nu_diff, 1043).unwrap();
        assert_relative_eq!(l, 2.0 * R_C - 1.65e-6, max_relative = 1e-9);
    }

    #[test]
    fn dual_resonance_homogeneous_in_mode_difference() {
        // Doubling dn and the frequency spacing leaves the length unchanged.
        let l1 = length_from_dual_resonance(3.85e14, 3.7e14, 1).unwrap();
        let l2 = length_from_dual_resonance(4.0e14, 3.7e14, 2).unwrap();
        assert_relative_eq!(l1, C / (2.0 * 1.5e13), max_relative = 1e-12);
        assert_relative_eq!(l2, l1, max_relative = 1e-12);
    }

    #[test]
    fn dual_resonance_rejects_degenerate_inputs() {
        assert!(matches!(
            length_from_dual_resonance(3.8e14, 3.8e14, 1),
            Err(GeometryError::DegenerateResonances { .. })
        ));
        assert!(matches!(
            length_from_dual_resonance(3.8e14, 3.9e14, 1),
            Err(GeometryError::UnorderedResonances { .. })
        ));
        assert!(matches!(
            length_from_dual_resonance(3.9e14, 3.8e14, 0),
            Err(GeometryError::ZeroModeDifference)
        ));
    }

    #[test]
    fn waist_at_midpoint_is_bare_prefactor() {
        let geom = CavityGeometry::new(R_C, R_C, 780e-9).unwrap();
        let expected = (780e-9 * R_C / (2.0 * PI)).sqrt();
        assert_relative_eq!(geom.waist().unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn waist_matches_reference_cavity() {
        // d = 1.65 um: w0 = 4.09 um.
        let w0 = paper_geometry(1.65e-6).waist().unwrap();
        assert_relative_eq!(w0, 4.090038e-6, max_relative = 1e-6);
        assert!((w0 - 4.1e-6).abs() < 0.05e-6);
    }

    #[test]
    fn waist_100_nm_and_fourth_root_law() {
        let w0 = paper_geometry(100e-9).waist().unwrap();
        assert_relative_eq!(w0, 2.029419e-6, max_relative = 1e-6);
        // w0(d/16) = w0(d)/2 to 1% close to concentricity.
        for d in [1.65e-6, 4e-6, 16e-6] {
            let w = paper_geometry(d).waist().unwrap();
            let w16 = paper_geometry(d / 16.0).waist().unwrap();
            assert_relative_eq!(w16, w / 2.0, max_relative = 1e-2);
        }
    }

    #[test]
    fn waist_singular_on_stability_boundary() {
        let geom = CavityGeometry::new(R_C, 2.0 * R_C, 780e-9).unwrap();
        assert!(matches!(geom.waist(), Err(GeometryError::Singular { .. })));
        let unstable = CavityGeometry::new(R_C, 2.0 * R_C + 1e-9, 780e-9).unwrap();
        assert!(matches!(
            unstable.waist(),
            Err(GeometryError::Unstable { .. })
        ));
    }

    #[test]
    fn mode_volume_reference_value() {
        let v = paper_geometry(1.65e-6).mode_volume().unwrap();
        assert_relative_eq!(v, 1.445014e-13, max_relative = 1e-6);
    }

    #[test]
    fn mode_volume_scalings() {
        // V = (pi/4) w0^2 l: linear in l at fixed w0, quadratic in w0 at fixed l.
        let v = |w0: f64, l: f64| PI / 4.0 * w0 * w0 * l;
        assert_relative_eq!(
            v(4.1e-6, 2.0 * 11e-3),
            2.0 * v(4.1e-6, 11e-3),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            v(2.0 * 4.1e-6, 11e-3),
            4.0 * v(4.1e-6, 11e-3),
            max_relative = 1e-14
        );
    }

    #[test]
    fn ideal_coupling_reference_value() {
        // Reference geometry and Rb D2: g0 = 2*pi*12.1 MHz.
        let g0 = paper_geometry(1.65e-6)
            .ideal_coupling(&AtomModel::rubidium_d2())
            .unwrap();
        let g0_mhz = g0 / (2.0 * PI * 1e6);
        assert_relative_eq!(g0_mhz, 12.068358, max_relative = 1e-6);
        assert!((g0_mhz - 12.1).abs() < 0.2);
    }

    #[test]
    fn ideal_coupling_inverse_sqrt_volume() {
        // g0^2 * V is a geometry invariant at fixed atom.
        let atom = AtomModel::rubidium_d2();
        let a = paper_geometry(1.65e-6);
        let b = paper_geometry(40e-6);
        let qa = a.ideal_coupling(&atom).unwrap().powi(2) * a.mode_volume().unwrap();
        let qb = b.ideal_coupling(&atom).unwrap().powi(2) * b.mode_volume().unwrap();
        assert_relative_eq!(qa, qb, max_relative = 1e-12);
        // Quadrupling V halves g0.
        let scaled = qa / (4.0 * a.mode_volume().unwrap());
        assert_relative_eq!(
            scaled.sqrt(),
            a.ideal_coupling(&atom).unwrap() / 2.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn ideal_coupling_100_nm() {
        let g0 = paper_geometry(100e-9)
            .ideal_coupling(&AtomModel::rubidium_d2())
            .unwrap();
        assert_relative_eq!(g0 / (2.0 * PI * 1e6), 24.320544, max_relative = 1e-6);
        // Consistent with the d^(-1/4) law from the 1.65 um anchor.
        let anchor = paper_geometry(1.65e-6)
            .ideal_coupling(&AtomModel::rubidium_d2())
            .unwrap();
        assert_relative_eq!(
            g0,
            anchor * (1.65e-6_f64 / 100e-9).powf(0.25),
            max_relative = 1e-2
        );
    }

    #[test]
    fn spacing_and_waist_monotone_on_near_concentric_branch() {
        let mut prev_spacing = f64::INFINITY;
        let mut prev_waist = f64::INFINITY;
        for i in 0..200 {
            let l = (R_C + 1e-6) + (R_C - 1e-6 - 10e-9) * i as f64 / 199.0;
            let geom = CavityGeometry::new(R_C, l, 780e-9).unwrap();
            let spacing = geom.transverse_mode_spacing().unwrap();
            let waist = geom.waist().unwrap();
            assert!(spacing < prev_spacing, "spacing not decreasing at l = {l}");
            assert!(waist < prev_waist, "waist not decreasing at l = {l}");
            prev_spacing = spacing;
            prev_waist = waist;
        }
    }

    #[test]
    fn sweep_rows_are_log_spaced_and_monotone() {
        let atom = AtomModel::rubidium_d2();
        let rows = concentric_sweep(
            R_C,
            RB87_D2_WAVELENGTH,
            &atom,
            10e-9,
            10e-6,
            31,
            CouplingCalibration::Ideal,
        )
        .unwrap();
        assert_eq!(rows.len(), 31);
        assert_relative_eq!(rows[0].distance, 10e-9, max_relative = 1e-12);
        assert_relative_eq!(rows[30].distance, 10e-6, max_relative = 1e-12);
        // Log-uniform: constant ratio between consecutive distances.
        let ratio = rows[1].distance / rows[0].distance;
        for pair in rows.windows(2) {
            assert_relative_eq!(pair[1].distance / pair[0].distance, ratio, max_relative = 1e-9);
            assert!(pair[1].coupling < pair[0].coupling);
        }
    }

    #[test]
    fn sweep_single_point() {
        let atom = AtomModel::rubidium_d2();
        let rows = concentric_sweep(
            R_C,
            RB87_D2_WAVELENGTH,
            &atom,
            1e-6,
            1e-6,
            1,
            CouplingCalibration::measured_default(),
        )
        .unwrap();
        assert_eq!(rows.len(), 1);
        assert_relative_eq!(rows[0].distance, 1e-6, max_relative = 1e-12);
    }

    #[test]
    fn target_solve_measured_calibration() {
        // g0/gamma = 4 under the measured calibration: d just below 200 nm,
        // the concentric-approach estimate.
        let atom = AtomModel::rubidium_d2();
        let d = solve_coupling_target(
            R_C,
            RB87_D2_WAVELENGTH,
            &atom,
            4.0,
            10e-9,
            1.65e-6,
            CouplingCalibration::measured_default(),
        )
        .unwrap();
        assert_relative_eq!(d, 189.91e-9, max_relative = 1e-4);
        assert!(d > 50e-9 && d < 200e-9);
    }

    #[test]
    fn target_solve_ideal_calibration() {
        let atom = AtomModel::rubidium_d2();
        let d = solve_coupling_target(
            R_C,
            RB87_D2_WAVELENGTH,
            &atom,
            8.0,
            10e-9,
            1.65e-6,
            CouplingCalibration::Ideal,
        )
        .unwrap();
        assert_relative_eq!(d, 100.67e-9, max_relative = 1e-3);
        // Forward evaluation.
        let g0 = paper_geometry(d).ideal_coupling(&atom).unwrap();
        assert_relative_eq!(g0 / atom.dipole_decay_rate, 8.0, max_relative = 1e-5);
    }

    #[test]
    fn target_solve_edge_cases() {
        let atom = AtomModel::rubidium_d2();
        let cal = CouplingCalibration::measured_default();
        let ratio_at_edge = match cal {
            CouplingCalibration::Measured {
                anchor_coupling,
                anchor_distance,
            } => anchor_coupling * (anchor_distance / 10e-9_f64).powf(0.25) / atom.dipole_decay_rate,
            _ => unreachable!(),
        };
        let d = solve_coupling_target(
            R_C,
            RB87_D2_WAVELENGTH,
            &atom,
            ratio_at_edge,
            10e-9,
            1.65e-6,
            cal,
        )
        .unwrap();
        assert_eq!(d, 10e-9);
        assert!(matches!(
            solve_coupling_target(R_C, RB87_D2_WAVELENGTH, &atom, 1e6, 10e-9, 1.65e-6, cal),
            Err(GeometryError::TargetUnreachable { .. })
        ));
    }
}
