//! The spatial atomic state and the incoherent operations acting on it.

use crate::dynamics::{LocalState, STATE_EPS};
use crate::kernel::gaussian_blur;
use crate::units::{thermal_velocity_um_per_s, RB87_MASS};
use crate::{Error, Result};

/// Density-weighted two-level state on a uniform 1-D grid.
///
/// Densities are in optical-depth-equivalent units: an unpatterned cloud
/// repumped to F=2 images at its configured peak OD with unit `od_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    /// Position of the first sample (µm).
    pub x0: f64,
    /// Sample spacing (µm).
    pub dx: f64,
    pub n1: Vec<f64>,
    pub n2: Vec<f64>,
    pub coh_re: Vec<f64>,
    pub coh_im: Vec<f64>,
}

impl StateGrid {
    /// A flat F=1 population of `density` at every sample.
    pub fn uniform_f1(x0: f64, dx: f64, count: usize, density: f64) -> Result<Self> {
        Self::from_f1(x0, dx, vec![density; count])
    }

    pub fn from_f1(x0: f64, dx: f64, n1: Vec<f64>) -> Result<Self> {
        let n = n1.len();
        let g = StateGrid {
            x0,
            dx,
            n1,
            n2: vec![0.0; n],
            coh_re: vec![0.0; n],
            coh_im: vec![0.0; n],
        };
        g.validate()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n1.is_empty()
    }

    pub fn position(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.dx
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.position(i))
    }

    pub fn local(&self, i: usize) -> LocalState {
        LocalState {
            p1: self.n1[i],
            p2: self.n2[i],
            coh_re: self.coh_re[i],
            coh_im: self.coh_im[i],
        }
    }

    pub fn set_local(&mut self, i: usize, s: LocalState) {
        self.n1[i] = s.p1;
        self.n2[i] = s.p2;
        self.coh_re[i] = s.coh_re;
        self.coh_im[i] = s.coh_im;
    }

    /// Σ(n₁ + n₂)·dx.
    pub fn total_density(&self) -> f64 {
        self.n1.iter().zip(&self.n2).map(|(a, b)| a + b).sum::<f64>() * self.dx
    }

    fn clear_coherence(&mut self) {
        self.coh_re.iter_mut().for_each(|c| *c = 0.0);
        self.coh_im.iter_mut().for_each(|c| *c = 0.0);
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::domain(format!("grid spacing must be positive, got {}", self.dx)));
        }
        let n = self.n1.len();
        if n < 2 {
            return Err(Error::domain(format!("grid needs at least 2 samples, got {n}")));
        }
        if self.n2.len() != n || self.coh_re.len() != n || self.coh_im.len() != n {
            return Err(Error::domain("grid channels have different lengths"));
        }
        for i in 0..n {
            let (a, b) = (self.n1[i], self.n2[i]);
            let scale = (a + b).max(1.0);
            if !(a >= -STATE_EPS * scale && b >= -STATE_EPS * scale) {
                return Err(Error::domain(format!("negative density at sample {i}")));
            }
            let c2 = self.coh_re[i].powi(2) + self.coh_im[i].powi(2);
            if c2 > a * b + STATE_EPS * scale * scale {
                return Err(Error::domain(format!("coherence exceeds population bound at sample {i}")));
            }
        }
        Ok(())
    }

    /// Checks the sampling adequacy `dx ≤ λ_eff/64` for a given period.
    pub fn check_sampling(&self, period_um: f64) -> Result<()> {
        if self.dx > period_um / 64.0 {
            return Err(Error::domain(format!(
                "grid spacing {} µm too coarse for a {period_um} µm standing wave (need ≤ λ_eff/64)",
                self.dx
            )));
        }
        Ok(())
    }
}

/// The released atomic cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudConfig {
    /// RMS width along the patterned axis (µm).
    pub sigma_axial_um: f64,
    /// Peak optical depth of the unpatterned cloud when fully in F=2.
    pub peak_od: f64,
    pub temperature_uk: f64,
    pub mass_kg: f64,
    /// Cloud centre (µm).
    pub center_um: f64,
}

impl Default for CloudConfig {
    /// 300 µm axial RMS width (several standing-wave periods), 0.3 peak OD, 10 µK ⁸⁷Rb.
    fn default() -> Self {
        CloudConfig {
            sigma_axial_um: 300.0,
            peak_od: 0.3,
            temperature_uk: 10.0,
            mass_kg: RB87_MASS,
            center_um: 0.0,
        }
    }
}

impl CloudConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_axial", self.sigma_axial_um),
            ("peak_od", self.peak_od),
            ("temperature", self.temperature_uk),
            ("mass", self.mass_kg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("cloud {name} must be positive, got {v}")));
            }
        }
        if !self.center_um.is_finite() {
            return Err(Error::domain("cloud centre must be finite"));
        }
        Ok(())
    }

    /// 1-D ballistic spread after free flight of `duration` seconds (µm).
    pub fn ballistic_sigma(&self, duration: f64) -> f64 {
        thermal_velocity_um_per_s(self.temperature_uk, self.mass_kg) * duration
    }
}

/// Simulation grid extent. Unset fields fall back to `λ_eff/128` spacing and
/// a half-width of six cloud RMS widths around the cloud centre.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GridSpec {
    pub dx_um: Option<f64>,
    pub half_width_um: Option<f64>,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("grid dx", self.dx_um), ("grid half-width", self.half_width_um)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::domain(format!("{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Returns `(x0, dx, count)`. Samples sit at integer multiples of `dx`, so
    /// the origin is always a sample.
    pub fn resolve(&self, period_um: f64, cloud: &CloudConfig) -> Result<(f64, f64, usize)> {
        self.validate()?;
        let dx = self.dx_um.unwrap_or(period_um / 128.0);
        let half = self.half_width_um.unwrap_or(6.0 * cloud.sigma_axial_um);
        let lo = ((cloud.center_um - half) / dx).floor();
        let hi = ((cloud.center_um + half) / dx).ceil();
        let count = (hi - lo) as usize + 1;
        if count > 50_000_000 {
            return Err(Error::domain(format!("grid of {count} samples is too large")));
        }
        Ok((lo * dx, dx, count))
    }
}

/// Gaussian F=1 cloud sampled at `x0 + i·dx`, peaking at `peak_od`.
pub fn init_cloud(cloud: &CloudConfig, x0: f64, dx: f64, count: usize) -> Result<StateGrid> {
    cloud.validate()?;
    if count < 2 {
        return Err(Error::domain(format!("grid needs at least 2 samples, got {count}")));
    }
    let n1 = (0..count)
        .map(|i| {
            let z = (x0 + i as f64 * dx - cloud.center_um) / cloud.sigma_axial_um;
            cloud.peak_od * (-0.5 * z * z).exp()
        })
        .collect();
    StateGrid::from_f1(x0, dx, n1)
}

/// Free flight for `duration` seconds: every channel is convolved with a
/// Gaussian of RMS width `sqrt(k_B T / m)`·duration.
pub fn ballistic_blur(grid: &StateGrid, duration: f64, cloud: &CloudConfig) -> Result<StateGrid> {
    if !(duration >= 0.0) {
        return Err(Error::domain(format!("free-flight duration must be ≥ 0, got {duration}")));
    }
    blur_sigma(grid, cloud.ballistic_sigma(duration))
}

pub(crate) fn blur_sigma(grid: &StateGrid, sigma_um: f64) -> Result<StateGrid> {
    grid.validate()?;
    if sigma_um == 0.0 {
        return Ok(grid.clone());
    }
    Ok(StateGrid {
        x0: grid.x0,
        dx: grid.dx,
        n1: gaussian_blur(&grid.n1, grid.dx, sigma_um),
        n2: gaussian_blur(&grid.n2, grid.dx, sigma_um),
        coh_re: gaussian_blur(&grid.coh_re, grid.dx, sigma_um),
        coh_im: gaussian_blur(&grid.coh_im, grid.dx, sigma_um),
    })
}

/// Removes a fraction `efficiency` of F=2 atoms from the field of view. The
/// push is projective, so all coherences are cleared.
pub fn deplete_f2(grid: &StateGrid, efficiency: f64) -> Result<StateGrid> {
    if !(0.0..=1.0).contains(&efficiency) {
        return Err(Error::domain(format!("push efficiency must lie in [0, 1], got {efficiency}")));
    }
    let mut out = grid.clone();
    let keep = 1.0 - efficiency;
    out.n2.iter_mut().for_each(|n| *n *= keep);
    out.clear_coherence();
    Ok(out)
}

/// Transfers all remaining F=1 population into F=2.
pub fn repump(grid: &StateGrid) -> StateGrid {
    let mut out = grid.clone();
    for (a, b) in out.n1.iter_mut().zip(out.n2.iter_mut()) {
        *b += *a;
        *a = 0.0;
    }
    out.clear_coherence();
    out
}
