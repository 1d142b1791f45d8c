//! Absorption-imaging model: F=2 column density → optical depth → point-spread
//! blur → detector pixels → optional photon shot noise.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::kernel::gaussian_blur;
use crate::units::FWHM_PER_SIGMA;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ImagingConfig {
    pub magnification: f64,
    /// Detector pixel pitch (µm, image space).
    pub pixel_size_um: f64,
    /// Gaussian PSF FWHM in object space (µm).
    pub psf_fwhm_um: f64,
    /// Density → OD calibration.
    pub od_scale: f64,
    pub noise_enabled: bool,
    /// Mean incident photons per pixel for the shot-noise model.
    pub photons_per_pixel: f64,
    /// Object-space position of a pixel edge (µm).
    pub pixel_offset_um: f64,
    /// OD reported for pixels with zero transmitted photons.
    pub od_max: f64,
}

impl Default for ImagingConfig {
    /// Magnification 9.7, 16 µm pixels, 4.5 µm resolution taken as the PSF FWHM.
    fn default() -> Self {
        ImagingConfig {
            magnification: 9.7,
            pixel_size_um: 16.0,
            psf_fwhm_um: 4.5,
            od_scale: 1.0,
            noise_enabled: false,
            photons_per_pixel: 1e4,
            pixel_offset_um: 0.0,
            od_max: 5.0,
        }
    }
}

impl ImagingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("magnification", self.magnification),
            ("pixel_size", self.pixel_size_um),
            ("od_scale", self.od_scale),
            ("od_max", self.od_max),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(format!("imaging {name} must be positive, got {v}")));
            }
        }
        if !(self.psf_fwhm_um >= 0.0 && self.psf_fwhm_um.is_finite()) {
            return Err(Error::domain(format!("PSF FWHM must be ≥ 0, got {}", self.psf_fwhm_um)));
        }
        if self.noise_enabled && !(self.photons_per_pixel > 0.0 && self.photons_per_pixel.is_finite()) {
            return Err(Error::domain(format!(
                "photons_per_pixel must be positive when noise is enabled, got {}",
                self.photons_per_pixel
            )));
        }
        if !self.pixel_offset_um.is_finite() {
            return Err(Error::domain("pixel offset must be finite"));
        }
        Ok(())
    }

    /// Object-space pixel pitch, `pixel_size / magnification` (µm).
    pub fn pixel_pitch_um(&self) -> f64 {
        self.pixel_size_um / self.magnification
    }

    pub fn psf_sigma_um(&self) -> f64 {
        self.psf_fwhm_um / FWHM_PER_SIGMA
    }
}

/// Values on a uniform object-space grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub x0: f64,
    pub dx: f64,
    pub values: Vec<f64>,
}

impl Profile {
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMeta {
    /// Shot index, or `None` for an averaged frame.
    pub shot: Option<usize>,
    /// Protocol clock at the imaging event (µs).
    pub clock_us: f64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    /// Pixel centres in object space (µm).
    pub pixel_centers: Vec<f64>,
    pub od_values: Vec<f64>,
    /// Indices of pixels with no transmitted photons.
    pub saturated: Vec<usize>,
    pub meta: FrameMeta,
}

impl ImageFrame {
    pub fn len(&self) -> usize {
        self.od_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.od_values.is_empty()
    }

    /// Pixel spacing, taken from the first two centres.
    pub fn pitch(&self) -> Option<f64> {
        (self.pixel_centers.len() >= 2).then(|| self.pixel_centers[1] - self.pixel_centers[0])
    }

    /// Pixel indices whose centres fall in `[lo, hi)`.
    pub fn window_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.pixel_centers.partition_point(|&x| x < lo);
        let end = self.pixel_centers.partition_point(|&x| x < hi);
        start..end.max(start)
    }
}

/// `OD = od_scale · n₂`.
pub fn density_to_od(n2: &[f64], config: &ImagingConfig) -> Vec<f64> {
    n2.iter().map(|&n| config.od_scale * n).collect()
}

/// Gaussian blur with FWHM `psf_fwhm_um`.
pub fn apply_psf(od: &Profile, config: &ImagingConfig) -> Profile {
    Profile {
        x0: od.x0,
        dx: od.dx,
        values: gaussian_blur(&od.values, od.dx, config.psf_sigma_um()),
    }
}

/// Bins the profile into object-space pixels of width `pixel_pitch_um`,
/// reporting per-pixel means. Each grid sample is treated as a cell of width
/// `dx` and split exactly between overlapping pixels. Only pixels that lie
/// fully inside the grid support are produced.
pub fn pixelate(od: &Profile, config: &ImagingConfig) -> Result<ImageFrame> {
    let pitch = config.pixel_pitch_um();
    if od.dx > pitch {
        return Err(Error::domain(format!(
            "grid spacing {} µm is coarser than the {pitch} µm pixel pitch",
            od.dx
        )));
    }
    let n = od.values.len();
    let lo = od.x0 - 0.5 * od.dx;
    let hi = od.x0 + (n as f64 - 0.5) * od.dx;
    let off = config.pixel_offset_um;
    let k_first = ((lo - off) / pitch).ceil() as i64;
    let k_end = ((hi - off) / pitch).floor() as i64;

    let mut centers = Vec::new();
    let mut values = Vec::new();
    for k in k_first..k_end {
        let a = off + k as f64 * pitch;
        let b = a + pitch;
        let i_lo = (((a - lo) / od.dx).floor().max(0.0) as usize).min(n - 1);
        let i_hi = (((b - lo) / od.dx).ceil() as usize).min(n);
        let mut acc = 0.0;
        for i in i_lo..i_hi {
            let c0 = lo + i as f64 * od.dx;
            let overlap = (b.min(c0 + od.dx) - a.max(c0)).max(0.0);
            acc += od.values[i] * overlap;
        }
        centers.push(a + 0.5 * pitch);
        values.push(acc / pitch);
    }
    Ok(ImageFrame {
        pixel_centers: centers,
        od_values: values,
        saturated: Vec::new(),
        meta: FrameMeta::default(),
    })
}

/// Noiseless chain from an F=2 density profile to a frame.
pub fn image_density(n2: &Profile, config: &ImagingConfig) -> Result<ImageFrame> {
    config.validate()?;
    let od = Profile {
        x0: n2.x0,
        dx: n2.dx,
        values: density_to_od(&n2.values, config),
    };
    pixelate(&apply_psf(&od, config), config)
}

/// Redraws every pixel as an absorption measurement: incident and transmitted
/// photon counts are Poisson with means `N` and `N·exp(−OD)` and the pixel is
/// replaced by `−ln(N_out/N_in)`. Pixels with no transmitted (or incident)
/// photons are flagged saturated and clamped to `od_max`. A no-op when noise
/// is disabled.
pub fn add_shot_noise<R: Rng + ?Sized>(frame: &ImageFrame, config: &ImagingConfig, rng: &mut R) -> Result<ImageFrame> {
    if !config.noise_enabled {
        return Ok(frame.clone());
    }
    config.validate()?;
    let incident = Poisson::new(config.photons_per_pixel)
        .map_err(|e| Error::domain(format!("photon number: {e}")))?;
    let mut out = frame.clone();
    out.saturated.clear();
    for (i, od) in out.od_values.iter_mut().enumerate() {
        let n_in: f64 = incident.sample(rng);
        let mean_out = config.photons_per_pixel * (-*od).exp();
        let n_out: f64 = if mean_out > 0.0 {
            Poisson::new(mean_out)
                .map_err(|e| Error::domain(format!("photon number: {e}")))?
                .sample(rng)
        } else {
            0.0
        };
        if n_out == 0.0 || n_in == 0.0 {
            *od = config.od_max;
            out.saturated.push(i);
        } else {
            *od = -(n_out / n_in).ln();
        }
    }
    Ok(out)
}
