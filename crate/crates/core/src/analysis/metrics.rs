use super::{count_peaks, estimate_period, fit_gaussian_peak, fit_sinusoid, FitParams};
use crate::imaging::ImageFrame;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSettings {
    /// Window for the sinusoid fit and period estimate (µm).
    pub fit_window: (f64, f64),
    /// Window for peak counting and the Gaussian fit (µm).
    pub peak_window: (f64, f64),
    pub min_prominence: f64,
}

impl AnalysisSettings {
    pub fn with_window(self, window: (f64, f64)) -> Self {
        AnalysisSettings {
            fit_window: window,
            peak_window: window,
            ..self
        }
    }
}

/// The standard set of figures of merit of one frame. Quantities that cannot
/// be evaluated are `None`, with the reason in `notes`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMetrics {
    pub mean: Option<f64>,
    pub amplitude: Option<f64>,
    pub visibility: Option<f64>,
    pub sinusoid_converged: Option<bool>,
    pub period: Option<f64>,
    pub peak_count: usize,
    pub peak_positions: Vec<f64>,
    pub min_separation: Option<f64>,
    pub gaussian_center: Option<f64>,
    pub fwhm: Option<f64>,
    pub e2_width: Option<f64>,
    pub gaussian_converged: Option<bool>,
    pub notes: Vec<String>,
}

/// Runs every analysis on `frame`. Only malformed inputs (bad windows or
/// settings) are errors; undefined metrics are recorded instead.
pub fn analyze_frame(frame: &ImageFrame, settings: &AnalysisSettings) -> Result<FrameMetrics> {
    let mut m = FrameMetrics::default();
    let peaks = count_peaks(frame, settings.peak_window, settings.min_prominence)?;
    m.peak_count = peaks.count();
    m.peak_positions = peaks.positions();
    m.min_separation = peaks.min_separation();

    match fit_sinusoid(frame, settings.fit_window) {
        Ok(fit) => {
            if let FitParams::Sinusoid { mean, amplitude, .. } = fit.params {
                m.mean = Some(mean);
                m.amplitude = Some(amplitude);
            }
            m.sinusoid_converged = Some(fit.converged);
            match fit.visibility() {
                Ok(v) => m.visibility = Some(v),
                Err(e) => m.notes.push(format!("visibility: {e}")),
            }
        }
        Err(e) => m.notes.push(format!("sinusoid fit: {e}")),
    }
    match estimate_period(frame, settings.fit_window, settings.min_prominence) {
        Ok(p) => m.period = Some(p),
        Err(e) => m.notes.push(format!("period: {e}")),
    }
    match fit_gaussian_peak(frame, settings.peak_window) {
        Ok(fit) => {
            m.gaussian_center = fit.center();
            m.fwhm = fit.fwhm();
            m.e2_width = fit.e2_width();
            m.gaussian_converged = Some(fit.converged);
        }
        Err(e) => m.notes.push(format!("gaussian fit: {e}")),
    }
    Ok(m)
}
