//! Figures of merit from image frames: sinusoid and Gaussian fits, peak
//! counting and period estimation.
//!
//! Windows are half-open position intervals `[lo, hi)` in µm selecting pixels
//! by their centres. Fits use the raw pixel values.

mod metrics;
mod peaks;
pub mod solver;

pub use metrics::{analyze_frame, AnalysisSettings, FrameMetrics};
pub use peaks::{count_peaks, Peak, PeakSet};

use std::f64::consts::PI;

use crate::imaging::ImageFrame;
use crate::units::FWHM_PER_SIGMA;
use crate::{Error, Result};
use solver::least_squares;

/// Minimum pixel count for a sinusoid fit.
pub const MIN_SINUSOID_PIXELS: usize = 8;
/// Minimum pixel count for a Gaussian fit.
pub const MIN_GAUSSIAN_PIXELS: usize = 5;
/// Zero-padding factor of the spectrum used to initialise the period.
const SPECTRUM_OVERSAMPLING: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitParams {
    /// `a + b·sin(2πx/p + φ)`, with `b ≥ 0` and `φ ∈ (−π, π]`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        period: f64,
        phase: f64,
    },
    /// `c + A·exp(−(x−x₀)²/(2σ²))`, with `σ > 0`.
    Gaussian {
        amplitude: f64,
        center: f64,
        sigma: f64,
        offset: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: FitParams,
    /// RMS residual in frame units.
    pub residual_rms: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FitParams {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            FitParams::Sinusoid {
                mean,
                amplitude,
                period,
                phase,
            } => sinusoid(&[mean, amplitude, period, phase], x),
            FitParams::Gaussian {
                amplitude,
                center,
                sigma,
                offset,
            } => gaussian(&[amplitude, center, sigma, offset], x),
        }
    }
}

impl FitResult {
    /// `b/a` of a sinusoid fit.
    pub fn visibility(&self) -> Result<f64> {
        match self.params {
            FitParams::Sinusoid { mean, amplitude, .. } => {
                if mean > 0.0 {
                    Ok(amplitude / mean)
                } else {
                    Err(Error::VisibilityUndefined { mean })
                }
            }
            FitParams::Gaussian { .. } => Err(Error::domain("visibility requires a sinusoid fit")),
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.params {
            FitParams::Sinusoid { period, .. } => Some(period),
            FitParams::Gaussian { .. } => None,
        }
    }

    pub fn sigma(&self) -> Option<f64> {
        match self.params {
            FitParams::Gaussian { sigma, .. } => Some(sigma),
            FitParams::Sinusoid { .. } => None,
        }
    }

    pub fn center(&self) -> Option<f64> {
        match self.params {
            FitParams::Gaussian { center, .. } => Some(center),
            FitParams::Sinusoid { .. } => None,
        }
    }

    /// Full width at half maximum of a Gaussian fit.
    pub fn fwhm(&self) -> Option<f64> {
        self.sigma().map(|s| FWHM_PER_SIGMA * s)
    }

    /// Full width at 1/e² of the maximum (4σ) of a Gaussian fit.
    pub fn e2_width(&self) -> Option<f64> {
        self.sigma().map(|s| 4.0 * s)
    }
}

fn sinusoid(p: &[f64], x: f64) -> f64 {
    p[0] + p[1] * (2.0 * PI * x / p[2] + p[3]).sin()
}

fn gaussian(p: &[f64], x: f64) -> f64 {
    let z = (x - p[1]) / p[2];
    p[3] + p[0] * (-0.5 * z * z).exp()
}

fn window_data(frame: &ImageFrame, window: (f64, f64), min_pixels: usize) -> Result<(&[f64], &[f64])> {
    if !(window.0 < window.1) {
        return Err(Error::domain(format!("empty window [{}, {})", window.0, window.1)));
    }
    let r = frame.window_range(window.0, window.1);
    if r.len() < min_pixels {
        return Err(Error::domain(format!(
            "window [{}, {}) holds {} pixels, need ≥ {min_pixels}",
            window.0,
            window.1,
            r.len()
        )));
    }
    if frame.od_values[r.clone()].iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("window contains non-finite pixel values"));
    }
    Ok((&frame.pixel_centers[r.clone()], &frame.od_values[r]))
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Least-squares `(a, c, s)` of `a + c·cos(kx) + s·sin(kx)`.
fn linear_sinusoid(xs: &[f64], ys: &[f64], period: f64) -> Option<[f64; 3]> {
    let k = 2.0 * PI / period;
    let a = nalgebra::DMatrix::from_fn(xs.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => (k * xs[i]).cos(),
        _ => (k * xs[i]).sin(),
    });
    let b = nalgebra::DVector::from_column_slice(ys);
    let sol = (a.transpose() * &a).lu().solve(&(a.transpose() * b))?;
    Some([sol[0], sol[1], sol[2]])
}

/// Period of the strongest non-zero component of the mean-subtracted data on
/// a zero-padded frequency grid, restricted to at least one cycle per window.
fn dominant_period(xs: &[f64], ys: &[f64], pitch: f64) -> f64 {
    let n = xs.len();
    let span = n as f64 * pitch;
    let mean = ys.iter().sum::<f64>() / n as f64;
    let df = 1.0 / (span * SPECTRUM_OVERSAMPLING as f64);
    let k_min = SPECTRUM_OVERSAMPLING;
    let k_max = (0.5 / pitch / df).floor() as usize;
    let mut best = (k_min, f64::NEG_INFINITY);
    for k in k_min..=k_max.max(k_min) {
        let w = 2.0 * PI * k as f64 * df;
        let (mut re, mut im) = (0.0, 0.0);
        for (&x, &y) in xs.iter().zip(ys) {
            re += (y - mean) * (w * x).cos();
            im -= (y - mean) * (w * x).sin();
        }
        let power = re * re + im * im;
        if power > best.1 {
            best = (k, power);
        }
    }
    1.0 / (best.0 as f64 * df)
}

/// Fits `a + b·sin(2πx/p + φ)` to the window.
pub fn fit_sinusoid(frame: &ImageFrame, window: (f64, f64)) -> Result<FitResult> {
    let (xs, ys) = window_data(frame, window, MIN_SINUSOID_PIXELS)?;
    let pitch = frame.pitch().unwrap_or(1.0);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let spread = ys.iter().map(|y| (y - mean).abs()).fold(0.0, f64::max);
    let span = xs[xs.len() - 1] - xs[0] + pitch;

    if spread == 0.0 {
        return Ok(FitResult {
            params: FitParams::Sinusoid {
                mean,
                amplitude: 0.0,
                period: span,
                phase: 0.0,
            },
            residual_rms: 0.0,
            converged: true,
            iterations: 0,
        });
    }

    let p_init = dominant_period(xs, ys, pitch);
    let [a0, c0, s0] =
        linear_sinusoid(xs, ys, p_init).ok_or_else(|| Error::Numerical("singular sinusoid basis".into()))?;
    // a + c cos + s sin = a + b sin(kx + φ) with b cos φ = s, b sin φ = c.
    let p0 = [a0, c0.hypot(s0), p_init, c0.atan2(s0)];
    let scale_y = mean.abs().max(spread);
    let scales = [scale_y, scale_y, p_init, 1.0];
    let sol = least_squares(sinusoid, xs, ys, &p0, &scales);

    let [a, mut b, p, mut phi] = [sol.params[0], sol.params[1], sol.params[2], sol.params[3]];
    let (p, phi_sign) = if p < 0.0 { (-p, -1.0) } else { (p, 1.0) };
    if phi_sign < 0.0 {
        // sin(−kx + φ) = sin(kx − φ + π)
        phi = PI - phi;
    }
    if b < 0.0 {
        b = -b;
        phi += PI;
    }
    Ok(FitResult {
        params: FitParams::Sinusoid {
            mean: a,
            amplitude: b,
            period: p,
            phase: wrap_phase(phi),
        },
        residual_rms: sol.residual_rms,
        converged: sol.converged && p.is_finite() && p > 0.0,
        iterations: sol.iterations,
    })
}

/// Initial `[A, x₀, σ, c]` for a bump (`sign = 1`) or dip (`sign = −1`):
/// centre at the extremum, σ from the second moment above half height.
fn gaussian_guess(xs: &[f64], ys: &[f64], pitch: f64, sign: f64) -> [f64; 4] {
    let (imax, ymax) = ys
        .iter()
        .map(|y| sign * y)
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .expect("window is non-empty");
    let c0 = ys.iter().map(|y| sign * y).fold(f64::INFINITY, f64::min);
    let a0 = ymax - c0;
    let x0 = xs[imax];
    let (mut w, mut m2) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let h = sign * y - c0;
        if h >= 0.5 * a0 {
            w += h;
            m2 += h * (x - x0) * (x - x0);
        }
    }
    // The part of a Gaussian above half maximum has RMS ≈ 0.60σ.
    let sigma0 = ((m2 / w).sqrt() / 0.6).max(0.5 * pitch);
    [sign * a0, x0, sigma0, sign * c0]
}

/// Fits `c + A·exp(−(x−x₀)²/(2σ²))` to a window holding one dominant peak.
pub fn fit_gaussian_peak(frame: &ImageFrame, window: (f64, f64)) -> Result<FitResult> {
    let (xs, ys) = window_data(frame, window, MIN_GAUSSIAN_PIXELS)?;
    let pitch = frame.pitch().unwrap_or(1.0);
    let range = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ys.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(range > 0.0) {
        return Err(Error::NoPeak { amplitude: 0.0 });
    }
    // Start from both the highest bump and the deepest dip and keep the better
    // fit, so that a window dominated by a dip reports no peak.
    let sol = [1.0, -1.0]
        .into_iter()
        .map(|sign| {
            let p0 = gaussian_guess(xs, ys, pitch, sign);
            let scales = [range, p0[2], p0[2], range];
            least_squares(gaussian, xs, ys, &p0, &scales)
        })
        .min_by(|a, b| a.residual_rms.total_cmp(&b.residual_rms))
        .expect("two candidate fits");
    let [amp, center, sigma, offset] = [sol.params[0], sol.params[1], sol.params[2].abs(), sol.params[3]];
    if !(amp > 0.0) {
        return Err(Error::NoPeak { amplitude: amp });
    }
    Ok(FitResult {
        params: FitParams::Gaussian {
            amplitude: amp,
            center,
            sigma,
            offset,
        },
        residual_rms: sol.residual_rms,
        converged: sol.converged && sigma > 0.0 && sigma.is_finite(),
        iterations: sol.iterations,
    })
}

/// Period from a sinusoid fit, or the mean adjacent-peak spacing if that fit
/// fails or does not converge to a period inside the window.
pub fn estimate_period(frame: &ImageFrame, window: (f64, f64), min_prominence: f64) -> Result<f64> {
    let width = window.1 - window.0;
    let fit_err = match fit_sinusoid(frame, window) {
        Ok(fit) => match fit.params {
            FitParams::Sinusoid { period, amplitude, .. }
                if fit.converged && amplitude > 0.0 && period <= width =>
            {
                return Ok(period)
            }
            _ => None,
        },
        Err(e) => Some(e),
    };
    let peaks = count_peaks(frame, window, min_prominence)?;
    peaks.mean_separation().ok_or_else(|| {
        fit_err.unwrap_or_else(|| Error::Numerical("no period found: sinusoid fit failed and fewer than 2 peaks".into()))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{blur_sigma, StateGrid};
    use crate::imaging::FrameMeta;
    use proptest::prelude::*;

    fn frame(x0: f64, pitch: f64, n: usize, f: impl Fn(f64) -> f64) -> ImageFrame {
        let pixel_centers: Vec<f64> = (0..n).map(|i| x0 + i as f64 * pitch).collect();
        ImageFrame {
            od_values: pixel_centers.iter().map(|&x| f(x)).collect(),
            pixel_centers,
            saturated: vec![],
            meta: FrameMeta::default(),
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn sinusoid_recovers_own_model() {
        let f = frame(-60.0, 1.649, 80, |x| 0.2 + 0.1 * (2.0 * PI * x / 59.3 + 1.0).sin());
        let fit = fit_sinusoid(&f, (-61.0, 73.0)).unwrap();
        assert!(fit.converged);
        let FitParams::Sinusoid {
            mean,
            amplitude,
            period,
            phase,
        } = fit.params
        else {
            panic!()
        };
        assert!(rel(mean, 0.2) < 1e-6);
        assert!(rel(amplitude, 0.1) < 1e-6);
        assert!(rel(period, 59.3) < 1e-6);
        assert!(rel(phase, 1.0) < 1e-6);
        assert!(rel(fit.visibility().unwrap(), 0.5) < 1e-6);
    }

    #[test]
    fn constant_frame_has_zero_visibility() {
        let f = frame(0.0, 1.0, 30, |_| 0.25);
        let fit = fit_sinusoid(&f, (0.0, 30.0)).unwrap();
        assert_eq!(fit.visibility().unwrap(), 0.0);
    }

    #[test]
    fn dark_frame_visibility_is_undefined() {
        let f = frame(0.0, 1.0, 30, |_| 0.0);
        let fit = fit_sinusoid(&f, (0.0, 30.0)).unwrap();
        assert!(matches!(fit.visibility(), Err(Error::VisibilityUndefined { .. })));
    }

    #[test]
    fn too_few_pixels_rejected() {
        let f = frame(0.0, 1.0, 30, |x| x.sin());
        assert!(fit_sinusoid(&f, (0.0, 5.0)).is_err());
        assert!(fit_gaussian_peak(&f, (0.0, 3.0)).is_err());
    }

    #[test]
    fn gaussian_recovers_fwhm() {
        let sigma = 20.0 / FWHM_PER_SIGMA;
        let f = frame(-40.0, 1.649, 50, |x| 0.05 + 0.3 * (-0.5 * ((x - 1.3) / sigma).powi(2)).exp());
        let fit = fit_gaussian_peak(&f, (-41.0, 42.0)).unwrap();
        assert!(fit.converged);
        assert!(rel(fit.fwhm().unwrap(), 20.0) < 1e-6);
        assert!(rel(fit.center().unwrap(), 1.3) < 1e-6);
        assert!(rel(fit.e2_width().unwrap(), 4.0 * sigma) < 1e-6);
    }

    #[test]
    fn flat_or_inverted_window_has_no_peak() {
        let f = frame(0.0, 1.0, 20, |_| 1.0);
        assert!(matches!(fit_gaussian_peak(&f, (0.0, 20.0)), Err(Error::NoPeak { .. })));
        let f = frame(-10.0, 1.0, 21, |x| 1.0 - (-0.5 * (x / 3.0).powi(2)).exp());
        assert!(matches!(fit_gaussian_peak(&f, (-10.0, 11.0)), Err(Error::NoPeak { .. })));
    }

    #[test]
    fn period_of_two_cycles() {
        let f = frame(0.0, 1.0, 100, |x| 1.0 + 0.5 * (2.0 * PI * x / 50.0).cos());
        assert!(rel(estimate_period(&f, (0.0, 100.0), 0.05).unwrap(), 50.0) < 1e-9);
    }

    #[test]
    fn period_falls_back_to_peak_spacing() {
        // Too few pixels for a sinusoid fit, but three clear peaks.
        let f = frame(0.0, 1.0, 7, |x| if (x as i64) % 2 == 1 { 1.0 } else { 0.0 });
        assert!(fit_sinusoid(&f, (0.0, 7.0)).is_err());
        assert_eq!(estimate_period(&f, (0.0, 7.0), 0.05).unwrap(), 2.0);
    }

    #[test]
    fn blur_lowers_visibility() {
        let dx = 0.25;
        let n = 960;
        let n2: Vec<f64> = (0..n).map(|i| 1.0 + 0.8 * (2.0 * PI * i as f64 * dx / 40.0).sin()).collect();
        let grid = StateGrid {
            x0: 0.0,
            dx,
            n1: vec![0.0; n],
            coh_re: vec![0.0; n],
            coh_im: vec![0.0; n],
            n2,
        };
        let vis = |g: &StateGrid| {
            let f = ImageFrame {
                pixel_centers: g.positions().collect(),
                od_values: g.n2.clone(),
                saturated: vec![],
                meta: FrameMeta::default(),
            };
            fit_sinusoid(&f, (40.0, 200.0)).unwrap().visibility().unwrap()
        };
        let mut last = vis(&grid);
        for s in [0.5, 1.0, 2.0, 4.0, 8.0] {
            let v = vis(&blur_sigma(&grid, s).unwrap());
            assert!(v < last, "σ={s}: {v} !< {last}");
            last = v;
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn sinusoid_fit_is_idempotent(
            a in 0.1f64..2.0,
            b_frac in 0.05f64..0.95,
            p in 15.0f64..40.0,
            phi in -3.0f64..3.0,
        ) {
            let b = a * b_frac;
            let f = frame(0.0, 1.0, 100, |x| a + b * (2.0 * PI * x / p + phi).sin());
            let first = fit_sinusoid(&f, (0.0, 100.0)).unwrap();
            let refit = frame(0.0, 1.0, 100, |x| first.params.eval(x));
            let second = fit_sinusoid(&refit, (0.0, 100.0)).unwrap();
            let (FitParams::Sinusoid { mean: a1, amplitude: b1, period: p1, phase: f1 },
                 FitParams::Sinusoid { mean: a2, amplitude: b2, period: p2, phase: f2 }) = (first.params, second.params)
            else { unreachable!() };
            prop_assert!(rel(a2, a1) < 1e-9);
            prop_assert!(rel(b2, b1) < 1e-9);
            prop_assert!(rel(p2, p1) < 1e-9);
            prop_assert!((f2 - f1).abs() < 1e-9);
            let v = second.visibility().unwrap();
            prop_assert!((0.0..=1.0 + 1e-9).contains(&v));
        }

        #[test]
        fn gaussian_fit_is_idempotent(
            amp in 0.05f64..2.0,
            center in -5.0f64..5.0,
            sigma in 2.0f64..10.0,
            offset in 0.0f64..0.5,
        ) {
            let f = frame(-40.0, 1.0, 81, |x| offset + amp * (-0.5 * ((x - center) / sigma).powi(2)).exp());
            let first = fit_gaussian_peak(&f, (-41.0, 41.0)).unwrap();
            let refit = frame(-40.0, 1.0, 81, |x| first.params.eval(x));
            let second = fit_gaussian_peak(&refit, (-41.0, 41.0)).unwrap();
            let (FitParams::Gaussian { amplitude: a1, center: c1, sigma: s1, offset: o1 },
                 FitParams::Gaussian { amplitude: a2, center: c2, sigma: s2, offset: o2 }) = (first.params, second.params)
            else { unreachable!() };
            prop_assert!(rel(a2, a1) < 1e-9);
            prop_assert!((c2 - c1).abs() < 1e-9 * s1);
            prop_assert!(rel(s2, s1) < 1e-9);
            prop_assert!((o2 - o1).abs() < 1e-9 * a1);
        }

        #[test]
        fn gaussian_center_follows_translation(
            center in -3.0f64..3.0,
            sigma in 3.0f64..8.0,
            shift in -10.0f64..10.0,
        ) {
            let g = |x: f64| 0.1 + (-0.5 * ((x - center) / sigma).powi(2)).exp() + 0.05 * (x / 7.0).sin();
            let f = frame(-40.0, 1.0, 81, g);
            let moved = ImageFrame {
                pixel_centers: f.pixel_centers.iter().map(|x| x + shift).collect(),
                ..f.clone()
            };
            let c0 = fit_gaussian_peak(&f, (-41.0, 41.0)).unwrap().center().unwrap();
            let c1 = fit_gaussian_peak(&moved, (-41.0 + shift, 41.0 + shift)).unwrap().center().unwrap();
            prop_assert!((c1 - c0 - shift).abs() < 0.1, "{} vs {}", c1 - c0, shift);
        }

        #[test]
        fn peak_count_is_affine_invariant(
            seed_vals in proptest::collection::vec(0.0f64..1.0, 40),
            scale in 0.01f64..100.0,
            shift in -5.0f64..5.0,
        ) {
            let base = frame(0.0, 1.0, 40, |x| seed_vals[x as usize]);
            let scaled = ImageFrame {
                od_values: base.od_values.iter().map(|v| scale * v + shift).collect(),
                ..base.clone()
            };
            let p0 = count_peaks(&base, (0.0, 40.0), 0.1).unwrap();
            let p1 = count_peaks(&scaled, (0.0, 40.0), 0.1).unwrap();
            prop_assert_eq!(p0.count(), p1.count());
            for (a, b) in p0.positions().iter().zip(p1.positions()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
