//! Physical constants and unit conversions.

use std::f64::consts::TAU;

/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

/// Mass of a ⁸⁷Rb atom (kg).
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

/// Ratio of FWHM to RMS width for a Gaussian, 2·sqrt(2 ln 2).
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// kHz (cycles) to angular frequency in rad/s.
pub fn khz_to_angular(khz: f64) -> f64 {
    TAU * khz * 1e3
}

pub fn angular_to_khz(omega: f64) -> f64 {
    omega / (TAU * 1e3)
}

pub fn us_to_s(us: f64) -> f64 {
    us * 1e-6
}

pub fn s_to_us(s: f64) -> f64 {
    s * 1e6
}

pub fn nm_to_um(nm: f64) -> f64 {
    nm * 1e-3
}

/// One-dimensional thermal velocity spread sqrt(k_B T / m) in µm/s.
pub fn thermal_velocity_um_per_s(temperature_uk: f64, mass_kg: f64) -> f64 {
    (BOLTZMANN * temperature_uk * 1e-6 / mass_kg).sqrt() * 1e6
}
