use crate::imaging::ImageFrame;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub position: f64,
    pub height: f64,
    /// Topographic prominence in frame units.
    pub prominence: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
}

impl PeakSet {
    pub fn count(&self) -> usize {
        self.peaks.len()
    }

    pub fn positions(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.position).collect()
    }

    /// Smallest gap between adjacent peaks, if there are at least two.
    pub fn min_separation(&self) -> Option<f64> {
        self.peaks
            .windows(2)
            .map(|w| w[1].position - w[0].position)
            .reduce(f64::min)
    }

    pub fn mean_separation(&self) -> Option<f64> {
        let n = self.peaks.len();
        (n >= 2).then(|| (self.peaks[n - 1].position - self.peaks[0].position) / (n - 1) as f64)
    }
}

/// Interior local maxima of the pixels whose centres lie in `[lo, hi)`, kept
/// when their prominence is at least `min_prominence·(max − min)` of the
/// window. Plateaus collapse to their centroid; isolated maxima are located
/// by a parabola through the three surrounding pixels.
pub fn count_peaks(frame: &ImageFrame, window: (f64, f64), min_prominence: f64) -> Result<PeakSet> {
    if !(min_prominence > 0.0 && min_prominence.is_finite()) {
        return Err(Error::domain(format!("min_prominence must be positive, got {min_prominence}")));
    }
    let range = frame.window_range(window.0, window.1);
    if range.is_empty() {
        return Err(Error::domain(format!(
            "window [{}, {}) contains no pixels",
            window.0, window.1
        )));
    }
    let xs = &frame.pixel_centers[range.clone()];
    let ys = &frame.od_values[range];
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let threshold = min_prominence * (hi - lo);
    let mut set = PeakSet::default();
    if hi - lo <= 0.0 {
        return Ok(set);
    }

    let n = ys.len();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && ys[j + 1] == ys[i] {
            j += 1;
        }
        let h = ys[i];
        let interior = i > 0 && j + 1 < n;
        if interior && ys[i - 1] < h && ys[j + 1] < h {
            let prominence = h - base_left(ys, i, h).max(base_right(ys, j, h));
            if prominence >= threshold {
                let position = if i == j {
                    parabolic_vertex(xs[i] - xs[i - 1], xs[i + 1] - xs[i], ys[i - 1], h, ys[i + 1]) + xs[i]
                } else {
                    xs[i..=j].iter().sum::<f64>() / (j - i + 1) as f64
                };
                set.peaks.push(Peak {
                    position,
                    height: h,
                    prominence,
                });
            }
        }
        i = j + 1;
    }
    Ok(set)
}

/// Lowest value between index `i` and the nearest strictly higher sample to
/// the left (or the window edge).
fn base_left(ys: &[f64], i: usize, h: f64) -> f64 {
    let mut low = h;
    for &y in ys[..i].iter().rev() {
        if y > h {
            break;
        }
        low = low.min(y);
    }
    low
}

fn base_right(ys: &[f64], j: usize, h: f64) -> f64 {
    let mut low = h;
    for &y in &ys[j + 1..] {
        if y > h {
            break;
        }
        low = low.min(y);
    }
    low
}

/// Vertex offset from the middle sample of a parabola through
/// `(−l, y0), (0, y1), (r, y2)`.
fn parabolic_vertex(l: f64, r: f64, y0: f64, y1: f64, y2: f64) -> f64 {
    let s0 = (y1 - y0) / l;
    let s2 = (y2 - y1) / r;
    let curvature = (s2 - s0) / (0.5 * (l + r));
    if curvature == 0.0 {
        return 0.0;
    }
    // Slope at the midpoint of each interval interpolated to zero.
    let mid_slope_at_zero = s0 + curvature * 0.5 * l;
    -mid_slope_at_zero / curvature
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::FrameMeta;

    fn frame(pitch: f64, ys: Vec<f64>) -> ImageFrame {
        ImageFrame {
            pixel_centers: (0..ys.len()).map(|i| i as f64 * pitch).collect(),
            od_values: ys,
            saturated: vec![],
            meta: FrameMeta::default(),
        }
    }

    #[test]
    fn parabola_vertex_exact() {
        let f = |x: f64| 2.0 - 3.0 * (x - 0.3) * (x - 0.3);
        let off = parabolic_vertex(1.0, 1.0, f(-1.0), f(0.0), f(1.0));
        assert!((off - 0.3).abs() < 1e-12);
        let off = parabolic_vertex(0.5, 1.5, f(-0.5), f(0.0), f(1.5));
        assert!((off - 0.3).abs() < 1e-12);
    }

    #[test]
    fn constant_frame_has_no_peaks() {
        let f = frame(1.0, vec![0.4; 20]);
        assert_eq!(count_peaks(&f, (0.0, 20.0), 0.05).unwrap().count(), 0);
    }

    #[test]
    fn empty_window_is_an_error() {
        let f = frame(1.0, vec![0.4; 20]);
        assert!(count_peaks(&f, (30.0, 40.0), 0.05).is_err());
        assert!(count_peaks(&f, (0.0, 20.0), 0.0).is_err());
    }

    #[test]
    fn plateau_collapses_to_centroid() {
        let f = frame(1.0, vec![0.0, 1.0, 2.0, 2.0, 2.0, 1.0, 0.0]);
        let p = count_peaks(&f, (0.0, 7.0), 0.05).unwrap();
        assert_eq!(p.count(), 1);
        assert_eq!(p.peaks[0].position, 3.0);
    }

    #[test]
    fn small_bumps_are_rejected_by_prominence() {
        let f = frame(1.0, vec![0.0, 1.0, 0.0, 0.0, 0.02, 0.0, 0.0, 0.8, 0.0]);
        let p = count_peaks(&f, (0.0, 9.0), 0.05).unwrap();
        assert_eq!(p.count(), 2);
        let p = count_peaks(&f, (0.0, 9.0), 0.01).unwrap();
        assert_eq!(p.count(), 3);
    }

    #[test]
    fn prominence_uses_the_higher_saddle() {
        // Peak at 0.8 sits on the flank of the 1.0 peak; its saddle is 0.5.
        let f = frame(1.0, vec![0.0, 1.0, 0.5, 0.8, 0.0]);
        let p = count_peaks(&f, (0.0, 5.0), 0.05).unwrap();
        assert!((p.peaks[1].prominence - 0.3).abs() < 1e-12);
        assert!((p.peaks[0].prominence - 1.0).abs() < 1e-12);
    }

    #[test]
    fn edge_maxima_are_not_counted() {
        let f = frame(1.0, vec![1.0, 0.5, 0.0, 0.5, 0.9]);
        assert_eq!(count_peaks(&f, (0.0, 5.0), 0.05).unwrap().count(), 0);
    }

    #[test]
    fn separations() {
        let f = frame(1.0, vec![0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        let p = count_peaks(&f, (0.0, 8.0), 0.05).unwrap();
        assert_eq!(p.positions(), vec![1.0, 3.0, 6.0]);
        assert_eq!(p.min_separation(), Some(2.0));
        assert_eq!(p.mean_separation(), Some(2.5));
    }
}
