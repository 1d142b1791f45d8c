//! Truncated Gaussian convolution on uniform grids.

/// Kernel support in units of the RMS width.
pub const TRUNCATION_SIGMAS: f64 = 6.0;

/// Sampled Gaussian kernel of RMS width `sigma` on spacing `dx`, truncated at
/// ±6σ and normalised to unit sum. `None` when the blur is a no-op.
pub fn gaussian_kernel(sigma: f64, dx: f64) -> Option<Vec<f64>> {
    if !(sigma > 0.0) {
        return None;
    }
    let half = (TRUNCATION_SIGMAS * sigma / dx).ceil() as usize;
    if half == 0 {
        return None;
    }
    let mut k: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let x = (j as f64 - half as f64) * dx / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    Some(k)
}

/// Same-length convolution with zero padding outside the grid.
pub fn convolve_same(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let n = values.len();
    let half = kernel.len() / 2;
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n - 1);
        let mut acc = 0.0;
        for j in lo..=hi {
            acc += values[j] * kernel[j + half - i];
        }
        *o = acc;
    }
    out
}

pub fn gaussian_blur(values: &[f64], dx: f64, sigma: f64) -> Vec<f64> {
    match gaussian_kernel(sigma, dx) {
        Some(k) => convolve_same(values, &k),
        None => values.to_vec(),
    }
}
