//! Standing-wave geometry and the spatial maps of the effective two-level drive.
//!
//! One Raman beam is split and recombined at a small half-angle, forming a
//! standing wave whose field amplitude varies as `cos(πx/λ_eff + φ)`; the
//! other beam is flat. The two-photon Rabi frequency follows the product of
//! the single-beam fields, so it inherits the cosine. Only the F=1 level sees
//! a position-dependent light shift from the standing-wave beam, which shows up
//! as a position-dependent two-photon detuning.

use std::f64::consts::PI;

use crate::units::{khz_to_angular, nm_to_um};
use crate::{Error, Result};

/// Geometry and strengths of the Raman beams.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    /// Raman wavelength (µm).
    pub wavelength_um: f64,
    /// Half of the crossing angle of the interfering arms (rad).
    pub half_angle_rad: f64,
    /// On-resonance two-photon Rabi frequency at an antinode (rad/s).
    pub peak_rabi: f64,
    /// Two-photon detuning at the antinodes (rad/s).
    pub two_photon_detuning: f64,
    /// Amplitude `s` of the spatially varying differential light shift (rad/s).
    pub shift_amplitude: f64,
    /// Offset of the standing-wave argument (rad).
    pub standing_wave_phase: f64,
    /// Field-amplitude contrast `v` of the standing wave, in [0, 1].
    pub interference_visibility: f64,
    /// Flat incoherent background `b`, as a fraction of the peak amplitude.
    pub background_fraction: f64,
    /// Single-photon detuning (rad/s). Bookkeeping only: its effect is folded
    /// into `peak_rabi` and `shift_amplitude`.
    pub single_photon_detuning: f64,
}

impl Default for FieldConfig {
    /// The experimental parameters: 795 nm, 0.4°, 2π·550 kHz peak coupling,
    /// 2π·240 kHz detuning and a light-shift amplitude of 4/3 of the detuning,
    /// which puts the half-maximum-Rabi positions on resonance.
    fn default() -> Self {
        let detuning = khz_to_angular(240.0);
        FieldConfig {
            wavelength_um: nm_to_um(795.0),
            half_angle_rad: 0.4f64.to_radians(),
            peak_rabi: khz_to_angular(550.0),
            two_photon_detuning: detuning,
            shift_amplitude: resonant_half_max_shift(detuning),
            standing_wave_phase: 0.0,
            interference_visibility: 1.0,
            background_fraction: 0.0,
            single_photon_detuning: 2.0 * PI * 750e6,
        }
    }
}

/// Light-shift amplitude that makes the positions with `Ω = Ω⁰/2` resonant:
/// `s·sin²(arccos ½) = δ₂`, i.e. `s = 4δ₂/3`.
pub fn resonant_half_max_shift(two_photon_detuning: f64) -> f64 {
    4.0 * two_photon_detuning / 3.0
}

impl FieldConfig {
    pub fn validate(&self) -> Result<()> {
        // effective_wavelength checks wavelength and half-angle.
        let period = self.effective_wavelength()?;
        if !period.is_finite() {
            return Err(Error::domain("effective wavelength is not finite"));
        }
        if !(self.peak_rabi > 0.0 && self.peak_rabi.is_finite()) {
            return Err(Error::domain(format!(
                "peak Rabi frequency must be positive, got {}",
                self.peak_rabi
            )));
        }
        if !(0.0..=1.0).contains(&self.interference_visibility) {
            return Err(Error::domain(format!(
                "interference visibility must lie in [0, 1], got {}",
                self.interference_visibility
            )));
        }
        if !(0.0..=1.0).contains(&self.background_fraction) {
            return Err(Error::domain(format!(
                "background fraction must lie in [0, 1], got {}",
                self.background_fraction
            )));
        }
        for (name, v) in [
            ("two-photon detuning", self.two_photon_detuning),
            ("shift amplitude", self.shift_amplitude),
            ("standing-wave phase", self.standing_wave_phase),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(format!("{name} must be finite")));
            }
        }
        Ok(())
    }

    /// Intensity period λ_eff of the standing wave (µm).
    pub fn effective_wavelength(&self) -> Result<f64> {
        effective_wavelength(self.wavelength_um, self.half_angle_rad)
    }

    /// Same field with `extra` added to the standing-wave phase.
    pub fn with_phase_offset(&self, extra: f64) -> FieldConfig {
        FieldConfig {
            standing_wave_phase: self.standing_wave_phase + extra,
            ..self.clone()
        }
    }

    /// Generalized Rabi frequency at an antinode, used as the pulse-area reference.
    pub fn antinode_generalized_rabi(&self) -> f64 {
        generalized_rabi(self.peak_rabi, self.two_photon_detuning)
    }

    /// A precomputed evaluator for `Ω(x)` and `δ_eff(x)`.
    pub fn sampler(&self) -> Result<FieldSampler> {
        self.validate()?;
        Ok(FieldSampler {
            wavenumber: PI / self.effective_wavelength()?,
            phase: self.standing_wave_phase,
            peak_rabi: self.peak_rabi,
            visibility: self.interference_visibility,
            background: self.background_fraction,
            detuning: self.two_photon_detuning,
            shift: self.shift_amplitude,
        })
    }
}

/// Evaluates the drive at single positions without re-validating the config.
#[derive(Debug, Clone, Copy)]
pub struct FieldSampler {
    wavenumber: f64,
    phase: f64,
    peak_rabi: f64,
    visibility: f64,
    background: f64,
    detuning: f64,
    shift: f64,
}

impl FieldSampler {
    #[inline]
    pub fn rabi(&self, x_um: f64) -> f64 {
        let arg = self.wavenumber * x_um + self.phase;
        self.peak_rabi * (self.visibility * arg.cos() + (1.0 - self.visibility) * self.background)
    }

    #[inline]
    pub fn detuning(&self, x_um: f64) -> f64 {
        let s = (self.wavenumber * x_um + self.phase).sin();
        self.detuning - self.shift * s * s
    }
}

/// λ_eff = λ / (2 sin θ).
pub fn effective_wavelength(wavelength_um: f64, half_angle_rad: f64) -> Result<f64> {
    if !(wavelength_um > 0.0 && wavelength_um.is_finite()) {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength_um}"
        )));
    }
    if !(half_angle_rad > 0.0 && half_angle_rad <= PI / 2.0) {
        return Err(Error::domain(format!(
            "half-angle must lie in (0°, 90°], got {}°",
            half_angle_rad.to_degrees()
        )));
    }
    Ok(wavelength_um / (2.0 * half_angle_rad.sin()))
}

/// Two-photon Rabi frequency `Ω⁰·[v·cos(πx/λ_eff + φ) + (1 − v)·b]` at each
/// position. Negative values carry the sign of the field.
pub fn rabi_map(config: &FieldConfig, positions_um: &[f64]) -> Result<Vec<f64>> {
    let sampler = config.sampler()?;
    check_finite(positions_um)?;
    Ok(positions_um.iter().map(|&x| sampler.rabi(x)).collect())
}

/// Effective two-photon detuning `δ₂ − s·sin²(πx/λ_eff + φ)`.
///
/// Beam powers are balanced so the shifts cancel at antinodes; the
/// standing-wave beam's F=1 shift scales as cos², leaving a −sin² residue.
/// Only δ² enters the populations, so the sign convention is internal.
pub fn effective_detuning_map(config: &FieldConfig, positions_um: &[f64]) -> Result<Vec<f64>> {
    let sampler = config.sampler()?;
    check_finite(positions_um)?;
    Ok(positions_um.iter().map(|&x| sampler.detuning(x)).collect())
}

/// `sqrt(Ω² + δ²)`.
#[inline]
pub fn generalized_rabi(omega: f64, detuning: f64) -> f64 {
    omega.hypot(detuning)
}

fn check_finite(positions: &[f64]) -> Result<()> {
    match positions.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(Error::domain(format!("position {x} is not finite"))),
        None => Ok(()),
    }
}
