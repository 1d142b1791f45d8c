//! Experiment configuration files.
//!
//! Configs are TOML documents with sections `[field]`, `[cloud]`, `[imaging]`,
//! `[shots]`, `[analysis]`, `[sweep]`, `[output]` and an array of
//! `[[sequence]]` events. Keys carry their units (`*_khz`, `*_um`, `*_us`,
//! ...); unknown keys are rejected. Values are converted to the internal
//! units of the library on [`ExperimentConfig::experiment`].
//!
//! ```toml
//! [shots]
//! num_shots = 20
//! seed = 7
//!
//! [[sequence]]
//! kind = "raman_pulse"
//! area_in_pi = 2.0
//!
//! [[sequence]]
//! kind = "image"
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::AnalysisSettings;
use crate::ensemble::{CloudConfig, GridSpec};
use crate::field::{resonant_half_max_shift, FieldConfig};
use crate::imaging::ImagingConfig;
use crate::sequence::{Experiment, JitterKind, PulseSpec, SequenceEvent, ShotModel};
use crate::units::{khz_to_angular, nm_to_um, us_to_s, ATOMIC_MASS_UNIT};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub wavelength_nm: f64,
    pub half_angle_deg: f64,
    pub peak_rabi_khz: f64,
    pub two_photon_detuning_khz: f64,
    /// Defaults to 4/3 of the two-photon detuning.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift_amplitude_khz: Option<f64>,
    pub standing_wave_phase_rad: f64,
    pub interference_visibility: f64,
    pub background_fraction: f64,
    pub single_photon_detuning_mhz: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection {
            wavelength_nm: 795.0,
            half_angle_deg: 0.4,
            peak_rabi_khz: 550.0,
            two_photon_detuning_khz: 240.0,
            shift_amplitude_khz: None,
            standing_wave_phase_rad: 0.0,
            interference_visibility: 1.0,
            background_fraction: 0.0,
            single_photon_detuning_mhz: 750.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CloudSection {
    pub sigma_axial_um: f64,
    pub peak_od: f64,
    pub temperature_uk: f64,
    pub mass_amu: f64,
    pub center_um: f64,
    /// Defaults to λ_eff/128.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_dx_um: Option<f64>,
    /// Defaults to six axial RMS widths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_half_width_um: Option<f64>,
}

impl Default for CloudSection {
    fn default() -> Self {
        let c = CloudConfig::default();
        CloudSection {
            sigma_axial_um: c.sigma_axial_um,
            peak_od: c.peak_od,
            temperature_uk: c.temperature_uk,
            mass_amu: 86.909_180_527,
            center_um: c.center_um,
            grid_dx_um: None,
            grid_half_width_um: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImagingSection {
    pub magnification: f64,
    pub pixel_size_um: f64,
    pub psf_fwhm_um: f64,
    pub od_scale: f64,
    pub noise_enabled: bool,
    pub photons_per_pixel: f64,
    pub pixel_offset_um: f64,
    pub od_max: f64,
}

impl Default for ImagingSection {
    fn default() -> Self {
        let i = ImagingConfig::default();
        ImagingSection {
            magnification: i.magnification,
            pixel_size_um: i.pixel_size_um,
            psf_fwhm_um: i.psf_fwhm_um,
            od_scale: i.od_scale,
            noise_enabled: i.noise_enabled,
            photons_per_pixel: i.photons_per_pixel,
            pixel_offset_um: i.pixel_offset_um,
            od_max: i.od_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum JitterSpec {
    #[default]
    Gaussian,
    UniformDrift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShotsSection {
    pub num_shots: usize,
    pub phase_jitter_rms_rad: f64,
    pub seed: u64,
    pub jitter: JitterSpec,
}

impl Default for ShotsSection {
    fn default() -> Self {
        ShotsSection {
            num_shots: 20,
            phase_jitter_rms_rad: 0.0,
            seed: 0,
            jitter: JitterSpec::Gaussian,
        }
    }
}

fn default_push_us() -> f64 {
    20.0
}
fn default_repump_us() -> f64 {
    10.0
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventSpec {
    /// Exactly one of `area_in_pi` and `duration_us`.
    RamanPulse {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        area_in_pi: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        duration_us: Option<f64>,
    },
    Push {
        #[serde(default = "default_push_us")]
        duration_us: f64,
        #[serde(default = "one")]
        efficiency: f64,
        #[serde(default = "one")]
        temperature_factor: f64,
    },
    Repump {
        #[serde(default = "default_repump_us")]
        duration_us: f64,
    },
    Wait {
        duration_us: f64,
    },
    Image,
}

impl EventSpec {
    pub fn pulse(area_in_pi: f64) -> Self {
        EventSpec::RamanPulse {
            area_in_pi: Some(area_in_pi),
            duration_us: None,
        }
    }

    pub fn push() -> Self {
        EventSpec::Push {
            duration_us: default_push_us(),
            efficiency: 1.0,
            temperature_factor: 1.0,
        }
    }

    pub fn repump() -> Self {
        EventSpec::Repump {
            duration_us: default_repump_us(),
        }
    }

    fn to_event(&self, index: usize) -> Result<SequenceEvent> {
        Ok(match *self {
            EventSpec::RamanPulse {
                area_in_pi: Some(a),
                duration_us: None,
            } => SequenceEvent::RamanPulse(PulseSpec::AreaInPi(a)),
            EventSpec::RamanPulse {
                area_in_pi: None,
                duration_us: Some(d),
            } => SequenceEvent::RamanPulse(PulseSpec::Duration(us_to_s(d))),
            EventSpec::RamanPulse { .. } => {
                return Err(Error::Config(format!(
                    "sequence.{index}: raman_pulse needs exactly one of area_in_pi and duration_us"
                )))
            }
            EventSpec::Push {
                duration_us,
                efficiency,
                temperature_factor,
            } => SequenceEvent::Push {
                duration: us_to_s(duration_us),
                efficiency,
                temperature_factor,
            },
            EventSpec::Repump { duration_us } => SequenceEvent::Repump {
                duration: us_to_s(duration_us),
            },
            EventSpec::Wait { duration_us } => SequenceEvent::Wait {
                duration: us_to_s(duration_us),
            },
            EventSpec::Image => SequenceEvent::Image,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Window for sinusoid fits and period estimates; defaults to `[−2λ_eff, 2λ_eff]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_window_um: Option<[f64; 2]>,
    /// Window for peak counting and Gaussian fits; defaults to `[−λ_eff/2, λ_eff/2]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub peak_window_um: Option<[f64; 2]>,
    pub min_prominence: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            fit_window_um: None,
            peak_window_um: None,
            min_prominence: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    /// Dotted path of a numeric field, e.g. `sequence.0.area_in_pi`.
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    pub formats: Vec<OutputFormat>,
    pub per_shot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            formats: vec![OutputFormat::Csv],
            per_shot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub field: FieldSection,
    #[serde(default)]
    pub cloud: CloudSection,
    #[serde(default)]
    pub imaging: ImagingSection,
    #[serde(default)]
    pub shots: ShotsSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub output: OutputSection,
    pub sequence: Vec<EventSpec>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn parse_error(origin: &str, text: &str, e: toml::de::Error) -> Error {
    Error::Parse {
        path: origin.to_string(),
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        msg: e.message().trim().to_string(),
    }
}

impl ExperimentConfig {
    /// Parses and validates a config document. `origin` names the source in
    /// error messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| parse_error(origin, text, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text`, applies `key=value` overrides, then validates.
    pub fn parse_with_overrides(text: &str, origin: &str, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Self::parse(text, origin);
        }
        // Parse once untouched so that file errors keep their line numbers.
        Self::parse_unvalidated(text, origin)?;
        let mut root = toml::Value::Table(toml::from_str(text).map_err(|e| parse_error(origin, text, e))?);
        for o in overrides {
            let (path, value) = parse_override(o)?;
            set_path(&mut root, &path, value)?;
        }
        Self::from_value(root)
    }

    fn parse_unvalidated(text: &str, origin: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| parse_error(origin, text, e))
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_with_overrides(&text, &path.display().to_string(), overrides)
    }

    pub fn to_value(&self) -> Result<toml::Value> {
        toml::Value::try_from(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn from_value(value: toml::Value) -> Result<Self> {
        let cfg: ExperimentConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("after overrides: {}", e.message().trim())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    /// Returns a copy with `overrides` applied.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut root = self.to_value()?;
        for o in overrides {
            let (path, value) = parse_override(o)?;
            set_path(&mut root, &path, value)?;
        }
        Self::from_value(root)
    }

    /// Returns a copy with the numeric field at `path` set to `x`.
    pub fn with_numeric(&self, path: &str, x: f64) -> Result<Self> {
        let mut root = self.to_value()?;
        let value = numeric_value_for(&root, path, x)?;
        set_path(&mut root, path, value)?;
        Self::from_value(root)
    }

    pub fn validate(&self) -> Result<()> {
        let exp = self.experiment()?;
        exp.validate()?;
        self.shot_model().validate()?;
        if self.shots.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("shots.seed must be ≤ {}", i64::MAX)));
        }
        if !(self.analysis.min_prominence > 0.0 && self.analysis.min_prominence.is_finite()) {
            return Err(Error::Config(format!(
                "analysis.min_prominence must be positive, got {}",
                self.analysis.min_prominence
            )));
        }
        for (name, w) in [
            ("fit_window_um", self.analysis.fit_window_um),
            ("peak_window_um", self.analysis.peak_window_um),
        ] {
            if let Some([lo, hi]) = w {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::Config(format!("analysis.{name} needs lo < hi, got [{lo}, {hi}]")));
                }
            }
        }
        if let Some(s) = &self.sweep {
            if s.parameter.is_empty() {
                return Err(Error::Config("sweep.parameter is empty".into()));
            }
        }
        Ok(())
    }

    pub fn field_config(&self) -> FieldConfig {
        let f = &self.field;
        let detuning = khz_to_angular(f.two_photon_detuning_khz);
        FieldConfig {
            wavelength_um: nm_to_um(f.wavelength_nm),
            half_angle_rad: f.half_angle_deg.to_radians(),
            peak_rabi: khz_to_angular(f.peak_rabi_khz),
            two_photon_detuning: detuning,
            shift_amplitude: f
                .shift_amplitude_khz
                .map_or_else(|| resonant_half_max_shift(detuning), khz_to_angular),
            standing_wave_phase: f.standing_wave_phase_rad,
            interference_visibility: f.interference_visibility,
            background_fraction: f.background_fraction,
            single_photon_detuning: khz_to_angular(1e3 * f.single_photon_detuning_mhz),
        }
    }

    pub fn experiment(&self) -> Result<Experiment> {
        let c = &self.cloud;
        let i = &self.imaging;
        let sequence = self
            .sequence
            .iter()
            .enumerate()
            .map(|(k, e)| e.to_event(k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Experiment {
            field: self.field_config(),
            cloud: CloudConfig {
                sigma_axial_um: c.sigma_axial_um,
                peak_od: c.peak_od,
                temperature_uk: c.temperature_uk,
                mass_kg: c.mass_amu * ATOMIC_MASS_UNIT,
                center_um: c.center_um,
            },
            grid: GridSpec {
                dx_um: c.grid_dx_um,
                half_width_um: c.grid_half_width_um,
            },
            imaging: ImagingConfig {
                magnification: i.magnification,
                pixel_size_um: i.pixel_size_um,
                psf_fwhm_um: i.psf_fwhm_um,
                od_scale: i.od_scale,
                noise_enabled: i.noise_enabled,
                photons_per_pixel: i.photons_per_pixel,
                pixel_offset_um: i.pixel_offset_um,
                od_max: i.od_max,
            },
            sequence,
        })
    }

    pub fn shot_model(&self) -> ShotModel {
        ShotModel {
            num_shots: self.shots.num_shots,
            phase_jitter_rms: self.shots.phase_jitter_rms_rad,
            seed: self.shots.seed,
            jitter_kind: match self.shots.jitter {
                JitterSpec::Gaussian => JitterKind::Gaussian,
                JitterSpec::UniformDrift => JitterKind::UniformDrift,
            },
        }
    }

    /// Analysis windows, with unset windows derived from the standing-wave period.
    pub fn analysis_settings(&self) -> Result<AnalysisSettings> {
        analysis_settings_for(&self.field_config(), &self.analysis)
    }

    /// SHA-256 over the canonical serialization of every field that affects
    /// simulation and analysis results. `output`, `sweep` and the shot count
    /// are excluded: shot k depends only on the seed and k, so extending a run
    /// keeps earlier shot frames byte-identical. The manifest records the count.
    pub fn digest(&self) -> Result<String> {
        let canonical = ExperimentConfig {
            sweep: None,
            output: OutputSection::default(),
            shots: ShotsSection {
                num_shots: ShotsSection::default().num_shots,
                ..self.shots.clone()
            },
            ..self.clone()
        };
        Ok(hex::encode(Sha256::digest(canonical.to_toml()?.as_bytes())))
    }
}

fn analysis_settings_for(field: &FieldConfig, analysis: &AnalysisSection) -> Result<AnalysisSettings> {
    let period = field.effective_wavelength()?;
    let pair = |w: Option<[f64; 2]>, half: f64| w.map_or((-half, half), |[lo, hi]| (lo, hi));
    Ok(AnalysisSettings {
        fit_window: pair(analysis.fit_window_um, 2.0 * period),
        peak_window: pair(analysis.peak_window_um, 0.5 * period),
        min_prominence: analysis.min_prominence,
    })
}

/// Analysis settings of a config that leaves `[field]` and `[analysis]` unset.
pub fn default_analysis_settings() -> Result<AnalysisSettings> {
    analysis_settings_for(&FieldConfig::default(), &AnalysisSection::default())
}

/// Splits `a.b.c=value`; the value is read as a TOML literal, falling back to
/// a bare string.
pub fn parse_override(s: &str) -> Result<(String, toml::Value)> {
    let (path, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("override `{s}` has an empty key segment")));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((path.to_string(), value))
}

/// Sets the value at a dotted path. Numeric segments index arrays; missing
/// table keys are created.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    let mut cur = root;
    for (depth, seg) in segments.iter().enumerate() {
        let last = depth + 1 == segments.len();
        let here = segments[..=depth].join(".");
        cur = match cur {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    return Ok(());
                }
                t.entry(seg.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let i: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("`{here}`: expected an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(i)
                    .ok_or_else(|| Error::Config(format!("`{here}`: index out of range (length {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{here}`: cannot descend into a scalar"))),
        };
    }
    unreachable!("path has at least one segment")
}

fn get_path<'a>(root: &'a toml::Value, path: &str) -> Option<&'a toml::Value> {
    path.split('.').try_fold(root, |cur, seg| match cur {
        toml::Value::Table(t) => t.get(seg),
        toml::Value::Array(a) => seg.parse::<usize>().ok().and_then(|i| a.get(i)),
        _ => None,
    })
}

/// The TOML value to store `x` at `path`, matching an existing integer or
/// float field. Non-numeric targets are rejected.
pub fn numeric_value_for(root: &toml::Value, path: &str, x: f64) -> Result<toml::Value> {
    match get_path(root, path) {
        Some(toml::Value::Integer(_)) => {
            if x.fract() == 0.0 && x.abs() < 9.0e15 {
                Ok(toml::Value::Integer(x as i64))
            } else {
                Err(Error::Config(format!("`{path}` is an integer field, got {x}")))
            }
        }
        Some(toml::Value::Float(_)) | None => Ok(toml::Value::Float(x)),
        Some(other) => Err(Error::Config(format!(
            "`{path}` is not numeric (found {})",
            other.type_str()
        ))),
    }
}

pub const PRESET_NAMES: [&str; 3] = ["fig1c", "fig2", "fig3"];

fn explicit_field() -> FieldSection {
    FieldSection {
        shift_amplitude_khz: Some(resonant_half_max_shift(240.0)),
        ..FieldSection::default()
    }
}

/// Fully populated configs for the three reference experiments.
///
/// - `fig1c`: unpatterned, 1π and 2π single-pulse patterns (areas 0, 1, 2).
/// - `fig2`: single pulses of area 1π, 2π, 4π, 5π and 9π.
/// - `fig3`: a 1π patterning pulse, push, a second pulse of area 0, 1π,
///   3/2π, 2π or 5/2π, push, repump, image.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let period = FieldConfig::default().effective_wavelength()?;
    let single = vec![EventSpec::pulse(1.0), EventSpec::Image];
    let base = |sequence, sweep: SweepSection, analysis| ExperimentConfig {
        field: explicit_field(),
        cloud: CloudSection::default(),
        imaging: ImagingSection::default(),
        shots: ShotsSection::default(),
        analysis,
        sweep: Some(sweep),
        output: OutputSection {
            dir: format!("out/{name}"),
            ..OutputSection::default()
        },
        sequence,
    };
    let single_period = AnalysisSection {
        fit_window_um: Some([-2.0 * period, 2.0 * period]),
        peak_window_um: Some([-0.5 * period, 0.5 * period]),
        min_prominence: 0.05,
    };
    let cfg = match name {
        "fig1c" => base(
            single,
            SweepSection {
                parameter: "sequence.0.area_in_pi".into(),
                values: vec![0.0, 1.0, 2.0],
            },
            single_period,
        ),
        "fig2" => base(
            single,
            SweepSection {
                parameter: "sequence.0.area_in_pi".into(),
                values: vec![1.0, 2.0, 4.0, 5.0, 9.0],
            },
            single_period,
        ),
        "fig3" => base(
            vec![
                EventSpec::pulse(1.0),
                EventSpec::push(),
                EventSpec::pulse(2.5),
                EventSpec::push(),
                EventSpec::repump(),
                EventSpec::Image,
            ],
            SweepSection {
                parameter: "sequence.2.area_in_pi".into(),
                values: vec![0.0, 1.0, 1.5, 2.0, 2.5],
            },
            // The narrowed peak sits on the node at λ_eff/2.
            AnalysisSection {
                fit_window_um: Some([-2.0 * period, 2.0 * period]),
                peak_window_um: Some([0.0, period]),
                min_prominence: 0.05,
            },
        ),
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}
