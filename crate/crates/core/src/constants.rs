//! Physical constants and unit conversions.

use std::f64::consts::TAU;

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Rb-87 D2 transition wavelength (m).
pub const RB87_D2_WAVELENGTH: f64 = 780.241e-9;

/// Rb-87 D2 dipole decay rate gamma (rad/s), half the 2*pi*6.07 MHz natural
/// linewidth.
pub const RB87_D2_DIPOLE_DECAY: f64 = TAU * 3.035e6;

/// Angular frequency (rad/s) from an ordinary frequency in MHz.
pub fn angular_from_mhz(mhz: f64) -> f64 {
    TAU * mhz * 1e6
}

/// Ordinary frequency in MHz from an angular frequency (rad/s).
pub fn mhz_from_angular(omega: f64) -> f64 {
    omega / (TAU * 1e6)
}

/// Angular frequency (rad/s) from an ordinary frequency in Hz.
pub fn angular_from_hz(hz: f64) -> f64 {
    TAU * hz
}

/// Ordinary frequency in Hz from an angular frequency (rad/s).
pub fn hz_from_angular(omega: f64) -> f64 {
    omega / TAU
}
