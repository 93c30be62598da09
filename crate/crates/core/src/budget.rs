//! Mirror and finesse bookkeeping: round-trip loss, in-coupling efficiency,
//! resonant transmission, decay-rate conventions, and cooperativity.
//!
//! Conventions used throughout:
//! - `2*pi/F = 2T + L` ties finesse to the per-mirror transmission T and the
//!   round-trip absorption loss L,
//! - `kappa_T = T c / (4 l)` is the field decay rate through one mirror and
//!   `kappa = (2T + L) c / (4 l)` the total field decay rate, so that
//!   `T_max = (2 kappa_T / kappa)^2` and `1 - eta = (1 - 2 kappa_T / kappa)^2`
//!   close the system exactly.

use std::f64::consts::PI;

use thiserror::Error;

use crate::constants::SPEED_OF_LIGHT as C;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BudgetError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be a fraction in (0, 1), got {value}")]
    NotAFraction { name: &'static str, value: f64 },
    #[error("negative loss: 2*pi/F = {round_trip} < 2T = {two_t} (finesse and transmission inconsistent)")]
    NegativeLoss { round_trip: f64, two_t: f64 },
}

/// Full loss/efficiency budget of a symmetric two-mirror cavity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBudget {
    /// Per-mirror intensity transmission T.
    pub mirror_transmission: f64,
    /// Round-trip absorption/scatter loss L.
    pub round_trip_absorption: f64,
    /// Finesse F = 2*pi / (2T + L).
    pub finesse: f64,
    /// Cavity field decay rate kappa (rad/s).
    pub cavity_field_decay: f64,
    /// Field decay rate through a single mirror kappa_T (rad/s).
    pub mirror_field_decay: f64,
    /// Maximum in-coupling efficiency eta.
    pub incoupling_efficiency: f64,
    /// Resonant transmission T_max.
    pub resonant_transmission: f64,
}

impl LossBudget {
    /// Budget from a measured full linewidth 2*kappa (rad/s), the nominal
    /// per-mirror transmission, and the cavity length (m).
    pub fn from_linewidth(
        full_linewidth: f64,
        mirror_transmission: f64,
        cavity_length: f64,
    ) -> Result<Self, BudgetError> {
        check_positive("full_linewidth", full_linewidth)?;
        check_positive("cavity_length", cavity_length)?;
        let finesse = finesse_from_linewidth(full_linewidth, cavity_length);
        Self::from_finesse(finesse, mirror_transmission, cavity_length)
    }

    /// Budget from the finesse, the per-mirror transmission, and the cavity
    /// length (m).
    pub fn from_finesse(
        finesse: f64,
        mirror_transmission: f64,
        cavity_length: f64,
    ) -> Result<Self, BudgetError> {
        check_positive("finesse", finesse)?;
        check_fraction("mirror_transmission", mirror_transmission)?;
        check_positive("cavity_length", cavity_length)?;
        let loss = absorption_loss(finesse, mirror_transmission)?;
        let (kappa, kappa_t) = decay_rates(mirror_transmission, loss, cavity_length);
        Ok(Self {
            mirror_transmission,
            round_trip_absorption: loss,
            finesse,
            cavity_field_decay: kappa,
            mirror_field_decay: kappa_t,
            incoupling_efficiency: incoupling_efficiency(mirror_transmission, loss),
            resonant_transmission: resonant_transmission(mirror_transmission, loss),
        })
    }

    /// Single-atom cooperativity C0 = g0^2 / (2 kappa gamma) for a coupling
    /// rate and atomic dipole decay rate (rad/s).
    pub fn cooperativity(&self, coupling: f64, atom_decay: f64) -> f64 {
        cooperativity(coupling, self.cavity_field_decay, atom_decay)
    }
}

/// Finesse from the full cavity linewidth 2*kappa (rad/s): F = pi c / (2 kappa l).
pub fn finesse_from_linewidth(full_linewidth: f64, cavity_length: f64) -> f64 {
    PI * C / (full_linewidth * cavity_length)
}

/// Round-trip absorption loss L = 2*pi/F - 2T.
///
/// Fails when the finesse implies less round-trip loss than two mirror
/// transmissions alone, i.e. the inputs are inconsistent.
pub fn absorption_loss(finesse: f64, transmission: f64) -> Result<f64, BudgetError> {
    let round_trip = 2.0 * PI / finesse;
    let two_t = 2.0 * transmission;
    if round_trip < two_t {
        return Err(BudgetError::NegativeLoss { round_trip, two_t });
    }
    Ok(round_trip - two_t)
}

/// Maximum in-coupling efficiency eta = 1 - L^2/(2T+L)^2.
pub fn incoupling_efficiency(transmission: f64, loss: f64) -> f64 {
    let denom = 2.0 * transmission + loss;
    1.0 - (loss / denom) * (loss / denom)
}

/// Resonant transmission T_max = 4T^2/(2T+L)^2.
pub fn resonant_transmission(transmission: f64, loss: f64) -> f64 {
    let denom = 2.0 * transmission + loss;
    let ratio = 2.0 * transmission / denom;
    ratio * ratio
}

/// Decay rates (kappa, kappa_T) (rad/s) from per-mirror transmission,
/// round-trip loss, and cavity length (m):
/// kappa_T = T c/(4l), kappa = (2T+L) c/(4l).
pub fn decay_rates(transmission: f64, loss: f64, cavity_length: f64) -> (f64, f64) {
    let kappa_t = transmission * C / (4.0 * cavity_length);
    let kappa = (2.0 * transmission + loss) * C / (4.0 * cavity_length);
    (kappa, kappa_t)
}

/// Single-atom cooperativity C0 = g0^2 / (2 kappa gamma).
pub fn cooperativity(coupling: f64, cavity_decay: f64, atom_decay: f64) -> f64 {
    coupling * coupling / (2.0 * cavity_decay * atom_decay)
}

fn check_positive(name: &'static str, value: f64) -> Result<(), BudgetError> {
    if !(value > 0.0) || !value.is_finite() {
        return Err(BudgetError::NonPositive { name, value });
    }
    Ok(())
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), BudgetError> {
    if !(value > 0.0 && value < 1.0) {
        return Err(BudgetError::NotAFraction { name, value });
    }
    Ok(())
}

/// A value with a one-sigma uncertainty, for first-order Gaussian
/// propagation through the budget formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Uncertain {
    pub value: f64,
    pub sigma: f64,
}

impl Uncertain {
    pub fn new(value: f64, sigma: f64) -> Self {
        Self {
            value,
            sigma: sigma.abs(),
        }
    }

    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0 }
    }
}

/// First-order propagation through `f` with central-difference partials.
pub fn propagate<const N: usize>(f: impl Fn(&[f64; N]) -> f64, inputs: [Uncertain; N]) -> Uncertain {
    let x: [f64; N] = inputs.map(|u| u.value);
    let mut var = 0.0;
    for i in 0..N {
        if inputs[i].sigma == 0.0 {
            continue;
        }
        let h = 1e-6 * x[i].abs().max(1e-12);
        let mut hi = x;
        let mut lo = x;
        hi[i] += h;
        lo[i] -= h;
        let partial = (f(&hi) - f(&lo)) / (2.0 * h);
        var += (partial * inputs[i].sigma).powi(2);
    }
    Uncertain::new(f(&x), var.sqrt())
}

/// Loss budget with propagated one-sigma uncertainties on every output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UncertainBudget {
    pub finesse: Uncertain,
    pub round_trip_absorption: Uncertain,
    pub incoupling_efficiency: Uncertain,
    pub resonant_transmission: Uncertain,
    pub cavity_field_decay: Uncertain,
    pub mirror_field_decay: Uncertain,
}

impl UncertainBudget {
    /// Propagate linewidth, transmission, and length uncertainties through
    /// the whole budget. Inputs: full linewidth 2*kappa (rad/s), per-mirror
    /// transmission, cavity length (m).
    pub fn from_linewidth(
        full_linewidth: Uncertain,
        transmission: Uncertain,
        cavity_length: Uncertain,
    ) -> Result<Self, BudgetError> {
        // Validate the central values once; the propagated evaluations stay
        // in the same neighborhood.
        let central = LossBudget::from_linewidth(
            full_linewidth.value,
            transmission.value,
            cavity_length.value,
        )?;
        let _ = central;
        let inputs = [full_linewidth, transmission, cavity_length];
        let budget = |x: &[f64; 3]| LossBudget::from_linewidth(x[0], x[1], x[2]);
        Ok(Self {
            finesse: propagate(|x| finesse_from_linewidth(x[0], x[2]), inputs),
            round_trip_absorption: propagate(
                |x| budget(x).map(|b| b.round_trip_absorption).unwrap_or(f64::NAN),
                inputs,
            ),
            incoupling_efficiency: propagate(
                |x| budget(x).map(|b| b.incoupling_efficiency).unwrap_or(f64::NAN),
                inputs,
            ),
            resonant_transmission: propagate(
                |x| budget(x).map(|b| b.resonant_transmission).unwrap_or(f64::NAN),
                inputs,
            ),
            cavity_field_decay: propagate(|x| x[0] / 2.0, inputs),
            mirror_field_decay: propagate(|x| x[1] * C / (4.0 * x[2]), inputs),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::angular_from_mhz;
    use approx::assert_relative_eq;

    const L_CAV: f64 = 10.998e-3;

    #[test]
    fn finesse_from_measured_linewidth() {
        // 2*kappa = 2*pi*99 MHz at l = 10.998 mm: F = 138(2).
        let f = finesse_from_linewidth(angular_from_mhz(99.0), L_CAV);
        assert_relative_eq!(f, 137.671, max_relative = 1e-4);
        assert!((f - 138.0).abs() < 2.0);
    }

    #[test]
    fn finesse_inverse_proportional_to_linewidth() {
        let f1 = finesse_from_linewidth(angular_from_mhz(99.0), L_CAV);
        let f2 = finesse_from_linewidth(angular_from_mhz(49.5), L_CAV);
        assert_relative_eq!(f2, 2.0 * f1, max_relative = 1e-12);
    }

    #[test]
    fn finesse_of_original_mirrors() {
        let f = finesse_from_linewidth(angular_from_mhz(27.25), L_CAV);
        assert_relative_eq!(f, 500.16, max_relative = 1e-4);
    }

    #[test]
    fn absorption_loss_reference() {
        // F = 138, T = 0.5%: L = 3.6(1)%.
        let loss = absorption_loss(138.0, 0.005).unwrap();
        assert!((loss - 0.036).abs() < 0.001);
    }

    #[test]
    fn absorption_loss_lossless_pair() {
        let t = 0.005;
        let f = 2.0 * PI / (2.0 * t);
        assert_relative_eq!(absorption_loss(f, t).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn absorption_loss_high_finesse() {
        let loss = absorption_loss(1000.0, 0.0025).unwrap();
        assert_relative_eq!(loss, 0.0012832, max_relative = 1e-4);
    }

    #[test]
    fn absorption_loss_rejects_inconsistent_inputs() {
        assert!(matches!(
            absorption_loss(10_000.0, 0.005),
            Err(BudgetError::NegativeLoss { .. })
        ));
    }

    #[test]
    fn incoupling_efficiency_reference() {
        let eta = incoupling_efficiency(0.005, 0.036);
        assert!((eta - 0.39).abs() < 0.01);
    }

    #[test]
    fn incoupling_efficiency_limits() {
        assert_relative_eq!(incoupling_efficiency(0.005, 0.0), 1.0, epsilon = 1e-15);
        // L = 2T: eta = 1 - (1/2)^2.
        assert_relative_eq!(incoupling_efficiency(0.005, 0.01), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn resonant_transmission_reference() {
        let t_max = resonant_transmission(0.005, 0.036);
        // Squared-denominator form: 4.8%, inside the measured 4.7(2)%.
        assert!((t_max - 0.047).abs() < 0.002);
    }

    #[test]
    fn resonant_transmission_limits() {
        assert_relative_eq!(resonant_transmission(0.005, 0.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(resonant_transmission(0.0025, 0.0013), 0.6299, max_relative = 1e-3);
    }

    #[test]
    fn decay_rates_reference() {
        let loss = absorption_loss(137.671, 0.005).unwrap();
        let (kappa, kappa_t) = decay_rates(0.005, loss, L_CAV);
        assert_relative_eq!(kappa, angular_from_mhz(49.5), max_relative = 1e-3);
        assert_relative_eq!(kappa_t, angular_from_mhz(5.423), max_relative = 1e-3);
        // kappa = 2 kappa_T + loss term, exactly.
        assert_relative_eq!(
            kappa,
            2.0 * kappa_t + loss * C / (4.0 * L_CAV),
            max_relative = 1e-14
        );
    }

    #[test]
    fn decay_rates_lossless() {
        let (kappa, kappa_t) = decay_rates(0.005, 0.0, L_CAV);
        assert_relative_eq!(kappa, 2.0 * kappa_t, max_relative = 1e-15);
    }

    #[test]
    fn cooperativity_reference() {
        let c0 = cooperativity(
            angular_from_mhz(5.0),
            angular_from_mhz(49.5),
            angular_from_mhz(3.035),
        );
        assert_relative_eq!(c0, 0.08320, max_relative = 1e-3);
        assert!((c0 - 0.084).abs() < 0.004);
    }

    #[test]
    fn cooperativity_scalings() {
        let c0 = cooperativity(1.0, 2.0, 3.0);
        assert_eq!(cooperativity(0.0, 2.0, 3.0), 0.0);
        assert_relative_eq!(cooperativity(2.0, 2.0, 3.0), 4.0 * c0, max_relative = 1e-15);
    }

    #[test]
    fn budget_closes_against_decay_rates() {
        // T_max = (2 kappa_T/kappa)^2 and 1 - eta = (1 - 2 kappa_T/kappa)^2.
        let budget = LossBudget::from_linewidth(angular_from_mhz(99.0), 0.005, L_CAV).unwrap();
        let ratio = 2.0 * budget.mirror_field_decay / budget.cavity_field_decay;
        assert_relative_eq!(
            budget.resonant_transmission,
            ratio * ratio,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            1.0 - budget.incoupling_efficiency,
            (1.0 - ratio) * (1.0 - ratio),
            max_relative = 1e-12
        );
        // eta - T_max = 4 T L / (2T+L)^2, the fraction absorbed on resonance.
        let t = budget.mirror_transmission;
        let l = budget.round_trip_absorption;
        assert_relative_eq!(
            budget.incoupling_efficiency - budget.resonant_transmission,
            4.0 * t * l / (2.0 * t + l).powi(2),
            max_relative = 1e-12
        );
        assert!(budget.resonant_transmission <= budget.incoupling_efficiency);
        assert!(budget.incoupling_efficiency <= 1.0);
    }

    #[test]
    fn loss_identity_round_trip() {
        // absorption_loss(F(2T+L), T) = L to machine precision.
        for (t, l) in [(0.005, 0.036), (0.0025, 0.0013), (0.01, 0.0)] {
            let finesse = 2.0 * PI / (2.0 * t + l);
            let recovered = absorption_loss(finesse, t).unwrap();
            assert_relative_eq!(recovered, l, epsilon = 1e-15, max_relative = 1e-12);
        }
    }

    #[test]
    fn linewidth_budget_matches_finesse_budget() {
        let via_linewidth =
            LossBudget::from_linewidth(angular_from_mhz(99.0), 0.005, L_CAV).unwrap();
        let via_finesse = LossBudget::from_finesse(137.671, 0.005, L_CAV).unwrap();
        assert_relative_eq!(
            via_linewidth.round_trip_absorption,
            via_finesse.round_trip_absorption,
            max_relative = 1e-4
        );
        // kappa reproduces the linewidth it came from.
        assert_relative_eq!(
            2.0 * via_linewidth.cavity_field_decay,
            angular_from_mhz(99.0),
            max_relative = 1e-12
        );
    }

    #[test]
    fn propagation_linear_function_is_exact() {
        let u = propagate(|x: &[f64; 2]| 2.0 * x[0] - x[1], [
            Uncertain::new(1.0, 0.3),
            Uncertain::new(2.0, 0.4),
        ]);
        assert_relative_eq!(u.value, 0.0, epsilon = 1e-12);
        assert_relative_eq!(u.sigma, (0.36_f64 + 0.16).sqrt(), max_relative = 1e-6);
    }

    #[test]
    fn propagated_budget_matches_quoted_uncertainties() {
        // 2*kappa = 2*pi*99(1) MHz, T = 0.5% exact, l exact.
        let budget = UncertainBudget::from_linewidth(
            Uncertain::new(angular_from_mhz(99.0), angular_from_mhz(1.0)),
            Uncertain::exact(0.005),
            Uncertain::exact(L_CAV),
        )
        .unwrap();
        // F = 138 +- ~1.4, L = 3.6 +- ~0.05 %: same class as the quoted 138(2), 3.6(1)%.
        assert!((budget.finesse.sigma - 1.39).abs() < 0.1);
        assert!(budget.round_trip_absorption.sigma > 3e-4);
        assert!(budget.round_trip_absorption.sigma < 1e-3);
        assert!(budget.incoupling_efficiency.sigma < 0.01);
    }
}
