//! Text formats for frames, reports, manifests, sweep tables and grid snapshots.
//!
//! Frame files hold `#`-prefixed header lines followed by a
//! `pixel_center_um,od` table:
//!
//! ```text
//! # rabilitho frame v1
//! # shot: average
//! # clock_us: 0.8332
//! # config_digest: 3f2a…
//! # saturated:
//! pixel_center_um,od
//! -1799.1752577319587,0.0001234
//! ```
//!
//! Numbers are written with Rust's shortest round-trip formatting, so
//! reading a frame back reproduces it bit for bit.

use std::fmt::Write as _;

use crate::analysis::{AnalysisSettings, FrameMetrics};
use crate::ensemble::StateGrid;
use crate::imaging::{FrameMeta, ImageFrame};
use crate::{Error, Result};

pub const FRAME_MAGIC: &str = "# rabilitho frame v1";
pub const FRAME_TABLE_HEADER: &str = "pixel_center_um,od";

pub fn frame_to_string(frame: &ImageFrame) -> String {
    let mut s = String::new();
    let shot = frame.meta.shot.map_or_else(|| "average".to_string(), |k| k.to_string());
    let saturated: Vec<String> = frame.saturated.iter().map(|i| i.to_string()).collect();
    let _ = writeln!(s, "{FRAME_MAGIC}");
    let _ = writeln!(s, "# shot: {shot}");
    let _ = writeln!(s, "# clock_us: {}", frame.meta.clock_us);
    let _ = writeln!(s, "# config_digest: {}", frame.meta.config_digest);
    let _ = writeln!(s, "# saturated: {}", saturated.join(" "));
    let _ = writeln!(s, "{FRAME_TABLE_HEADER}");
    for (x, v) in frame.pixel_centers.iter().zip(&frame.od_values) {
        let _ = writeln!(s, "{x},{v}");
    }
    s
}

pub fn parse_frame(text: &str, origin: &str) -> Result<ImageFrame> {
    let err = |line: usize, msg: String| Error::Parse {
        path: origin.to_string(),
        line,
        msg,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == FRAME_MAGIC => {}
        _ => return Err(err(1, format!("expected `{FRAME_MAGIC}`"))),
    }
    let mut meta = FrameMeta::default();
    let mut saturated = Vec::new();
    let mut saturated_line = 1;
    let mut seen_table = false;
    let mut centers = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines {
        let line = line.trim_end();
        if !seen_table {
            if line == FRAME_TABLE_HEADER {
                seen_table = true;
                continue;
            }
            let body = line
                .strip_prefix('#')
                .ok_or_else(|| err(n, format!("expected a `#` header line or `{FRAME_TABLE_HEADER}`")))?;
            let (key, value) = body
                .split_once(':')
                .ok_or_else(|| err(n, "header line is not `key: value`".into()))?;
            let value = value.trim();
            match key.trim() {
                "shot" => {
                    meta.shot = match value {
                        "average" => None,
                        v => Some(v.parse().map_err(|_| err(n, format!("bad shot index `{v}`")))?),
                    }
                }
                "clock_us" => {
                    meta.clock_us = value.parse().map_err(|_| err(n, format!("bad clock `{value}`")))?
                }
                "config_digest" => meta.config_digest = value.to_string(),
                "saturated" => {
                    saturated_line = n;
                    saturated = value
                        .split_whitespace()
                        .map(|t| t.parse().map_err(|_| err(n, format!("bad pixel index `{t}`"))))
                        .collect::<Result<_>>()?
                }
                other => return Err(err(n, format!("unknown header key `{other}`"))),
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let (x, v) = line
            .split_once(',')
            .ok_or_else(|| err(n, "expected `pixel_center_um,od`".into()))?;
        let x: f64 = x.trim().parse().map_err(|_| err(n, format!("bad position `{x}`")))?;
        let v: f64 = v.trim().parse().map_err(|_| err(n, format!("bad OD `{v}`")))?;
        if let Some(&prev) = centers.last() {
            if !(x > prev) {
                return Err(err(n, "pixel centres must increase".into()));
            }
        }
        centers.push(x);
        values.push(v);
    }
    if !seen_table {
        return Err(err(text.lines().count().max(1), format!("missing `{FRAME_TABLE_HEADER}` line")));
    }
    if let Some(&bad) = saturated.iter().find(|&&i| i >= centers.len()) {
        return Err(err(saturated_line, format!("saturated pixel index {bad} out of range")));
    }
    Ok(ImageFrame {
        pixel_centers: centers,
        od_values: values,
        saturated,
        meta,
    })
}

/// 16-bit binary PGM (one row), scaled so that `od_max` maps to 65535.
/// Negative values are clipped to 0.
pub fn frame_to_pgm(frame: &ImageFrame, od_max: f64) -> Vec<u8> {
    let mut out = format!("P5\n{} 1\n65535\n", frame.len()).into_bytes();
    for &v in &frame.od_values {
        let q = if od_max > 0.0 {
            (v / od_max * 65535.0).round().clamp(0.0, 65535.0) as u16
        } else {
            0
        };
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// Sidecar for [`frame_to_pgm`]: the scale and pixel geometry.
pub fn pgm_sidecar(frame: &ImageFrame, od_max: f64) -> String {
    format!(
        "od_full_scale: {od_max}\nfirst_center_um: {}\npitch_um: {}\n",
        frame.pixel_centers.first().copied().unwrap_or(0.0),
        frame.pitch().unwrap_or(0.0)
    )
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |x| x.to_string())
}

fn join(vs: &[f64]) -> String {
    vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ")
}

/// One `key: value` block describing a frame's metrics.
pub fn report_block(label: &str, meta: &FrameMeta, settings: &AnalysisSettings, m: &FrameMetrics) -> String {
    let mut s = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(s, "{k}: {v}");
    };
    kv("frame", label.to_string());
    kv("config_digest", meta.config_digest.clone());
    kv("fit_window_um", join(&[settings.fit_window.0, settings.fit_window.1]));
    kv("peak_window_um", join(&[settings.peak_window.0, settings.peak_window.1]));
    kv("min_prominence", settings.min_prominence.to_string());
    kv("mean_od", opt(m.mean));
    kv("amplitude_od", opt(m.amplitude));
    kv("visibility", opt(m.visibility));
    kv(
        "sinusoid_converged",
        m.sinusoid_converged.map_or("undefined".into(), |b| b.to_string()),
    );
    kv("period_um", opt(m.period));
    kv("peak_count", m.peak_count.to_string());
    kv("peak_positions_um", join(&m.peak_positions));
    kv("min_separation_um", opt(m.min_separation));
    kv("gaussian_center_um", opt(m.gaussian_center));
    kv("fwhm_um", opt(m.fwhm));
    kv("e2_width_um", opt(m.e2_width));
    kv(
        "gaussian_converged",
        m.gaussian_converged.map_or("undefined".into(), |b| b.to_string()),
    );
    for note in &m.notes {
        kv("note", note.clone());
    }
    s
}

pub fn manifest(digest: &str, seed: u64, num_shots: usize, files: &[String]) -> String {
    let mut s = format!("config_digest: {digest}\nseed: {seed}\nnum_shots: {num_shots}\n");
    for f in files {
        let _ = writeln!(s, "file: {f}");
    }
    s
}

pub const SWEEP_HEADER: &str = "value,visibility,period_um,peak_count,fwhm_um,e2_width_um,min_separation_um";

/// A delimited sweep table; undefined metrics are empty fields.
pub fn sweep_table(rows: &[(f64, FrameMetrics)]) -> String {
    let f = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut s = format!("{SWEEP_HEADER}\n");
    for (value, m) in rows {
        let _ = writeln!(
            s,
            "{value},{},{},{},{},{},{}",
            f(m.visibility),
            f(m.period),
            m.peak_count,
            f(m.fwhm),
            f(m.e2_width),
            f(m.min_separation)
        );
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    F1,
    F2,
    CoherenceRe,
    CoherenceIm,
}

/// Two-column `x_um,value` snapshot of one grid channel.
pub fn grid_channel_to_string(grid: &StateGrid, channel: Channel) -> String {
    let (name, values) = match channel {
        Channel::F1 => ("n1", &grid.n1),
        Channel::F2 => ("n2", &grid.n2),
        Channel::CoherenceRe => ("coh_re", &grid.coh_re),
        Channel::CoherenceIm => ("coh_im", &grid.coh_im),
    };
    let mut s = format!("x_um,{name}\n");
    for (x, v) in grid.positions().zip(values) {
        let _ = writeln!(s, "{x},{v}");
    }
    s
}
