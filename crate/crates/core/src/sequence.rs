//! Experiment protocols and multi-shot execution.
//!
//! A protocol is an ordered list of [`SequenceEvent`]s ending in exactly one
//! [`SequenceEvent::Image`]. Each shot draws a quasi-static interferometer
//! phase from its own counter-based random stream, so shot `k` is independent
//! of how many shots are run and of execution order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::dynamics::{apply_pulse, area_to_duration};
use crate::ensemble::{ballistic_blur, deplete_f2, init_cloud, repump, CloudConfig, GridSpec};
use crate::field::FieldConfig;
use crate::imaging::{add_shot_noise, image_density, FrameMeta, ImageFrame, ImagingConfig, Profile};
use crate::units::s_to_us;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PulseSpec {
    /// Area in units of π, referenced to the antinode generalized Rabi frequency.
    AreaInPi(f64),
    /// Explicit duration (s).
    Duration(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SequenceEvent {
    RamanPulse(PulseSpec),
    /// State-selective depletion of F=2 followed by free flight of `duration`.
    /// `temperature_factor` scales the cloud temperature for that flight.
    Push {
        duration: f64,
        efficiency: f64,
        temperature_factor: f64,
    },
    /// F=1 → F=2 transfer followed by free flight of `duration`.
    Repump { duration: f64 },
    Wait { duration: f64 },
    Image,
}

impl SequenceEvent {
    /// Push with the default 20 µs duration and complete depletion.
    pub fn push() -> Self {
        SequenceEvent::Push {
            duration: 20e-6,
            efficiency: 1.0,
            temperature_factor: 1.0,
        }
    }

    /// Repump with the default 10 µs of accompanying free flight.
    pub fn repump() -> Self {
        SequenceEvent::Repump { duration: 10e-6 }
    }

    pub fn pulse_area(area_in_pi: f64) -> Self {
        SequenceEvent::RamanPulse(PulseSpec::AreaInPi(area_in_pi))
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Sequence(format!("{what} must be ≥ 0, got {v}")));
        match *self {
            SequenceEvent::RamanPulse(PulseSpec::AreaInPi(a)) if !(a >= 0.0 && a.is_finite()) => bad("pulse area", a),
            SequenceEvent::RamanPulse(PulseSpec::Duration(d)) if !(d >= 0.0 && d.is_finite()) => bad("pulse duration", d),
            SequenceEvent::Push {
                duration,
                efficiency,
                temperature_factor,
            } => {
                if !(duration >= 0.0 && duration.is_finite()) {
                    return bad("push duration", duration);
                }
                if !(0.0..=1.0).contains(&efficiency) {
                    return Err(Error::Sequence(format!("push efficiency must lie in [0, 1], got {efficiency}")));
                }
                if !(temperature_factor > 0.0 && temperature_factor.is_finite()) {
                    return Err(Error::Sequence(format!(
                        "push temperature factor must be positive, got {temperature_factor}"
                    )));
                }
                Ok(())
            }
            SequenceEvent::Repump { duration } | SequenceEvent::Wait { duration }
                if !(duration >= 0.0 && duration.is_finite()) =>
            {
                bad("duration", duration)
            }
            _ => Ok(()),
        }
    }
}

/// Checks event parameters and that the protocol ends in its only imaging event.
pub fn validate_sequence(events: &[SequenceEvent]) -> Result<()> {
    let images: Vec<usize> = events
        .iter()
        .enumerate()
        .filter(|(_, e)| matches!(e, SequenceEvent::Image))
        .map(|(i, _)| i)
        .collect();
    match images.as_slice() {
        [] => return Err(Error::Sequence("sequence has no image event".into())),
        [i] if *i + 1 != events.len() => {
            return Err(Error::Sequence(format!(
                "image event at position {i} must be the last event"
            )))
        }
        [_] => {}
        many => {
            return Err(Error::Sequence(format!(
                "sequence has {} image events, expected exactly one",
                many.len()
            )))
        }
    }
    events.iter().try_for_each(SequenceEvent::validate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum JitterKind {
    /// Normally distributed arm phase with RMS `phase_jitter_rms`.
    #[default]
    Gaussian,
    /// Uniform arm phase on `±√3·rms`, a stand-in for slow drift.
    UniformDrift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotModel {
    pub num_shots: usize,
    /// RMS of the shot-to-shot relative phase of the interferometer arms (rad).
    pub phase_jitter_rms: f64,
    pub seed: u64,
    pub jitter_kind: JitterKind,
}

impl Default for ShotModel {
    fn default() -> Self {
        ShotModel {
            num_shots: 20,
            phase_jitter_rms: 0.0,
            seed: 0,
            jitter_kind: JitterKind::Gaussian,
        }
    }
}

impl ShotModel {
    pub fn validate(&self) -> Result<()> {
        if self.num_shots == 0 {
            return Err(Error::domain("num_shots must be ≥ 1"));
        }
        if !(self.phase_jitter_rms >= 0.0 && self.phase_jitter_rms.is_finite()) {
            return Err(Error::domain(format!(
                "phase_jitter_rms must be ≥ 0, got {}",
                self.phase_jitter_rms
            )));
        }
        Ok(())
    }

    /// The random stream of shot `k`: the seed selects the key, `k` the stream.
    pub fn shot_rng(&self, k: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(k as u64);
        rng
    }

    /// Draws the arm phase of a shot from (and advances) its stream.
    pub fn draw_phase<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.jitter_kind {
            JitterKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.phase_jitter_rms * z
            }
            JitterKind::UniformDrift => {
                let u: f64 = rng.random();
                self.phase_jitter_rms * 3f64.sqrt() * (2.0 * u - 1.0)
            }
        }
    }

    pub fn shot_phase(&self, k: usize) -> f64 {
        self.draw_phase(&mut self.shot_rng(k))
    }
}

/// Everything needed to run a shot.
#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub field: FieldConfig,
    pub cloud: CloudConfig,
    pub grid: GridSpec,
    pub imaging: ImagingConfig,
    pub sequence: Vec<SequenceEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub average: ImageFrame,
    pub shots: Vec<ImageFrame>,
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        self.cloud.validate()?;
        self.imaging.validate()?;
        self.grid.validate()?;
        validate_sequence(&self.sequence)
    }

    /// Runs one shot with interferometer arm phase `arm_phase`. The standing
    /// wave argument shifts by half the arm phase, moving the pattern by
    /// `arm_phase·λ_eff/2π`. Both pulses of a shot see the same phase.
    pub fn run_shot<R: Rng + ?Sized>(&self, arm_phase: f64, noise_rng: &mut R) -> Result<ImageFrame> {
        self.validate()?;
        let period = self.field.effective_wavelength()?;
        let (x0, dx, count) = self.grid.resolve(period, &self.cloud)?;
        let mut grid = init_cloud(&self.cloud, x0, dx, count)?;
        grid.check_sampling(period)?;
        let field = self.field.with_phase_offset(0.5 * arm_phase);

        let mut clock = 0.0;
        for event in &self.sequence {
            match *event {
                SequenceEvent::RamanPulse(spec) => {
                    let duration = match spec {
                        PulseSpec::AreaInPi(a) => area_to_duration(a, &field)?,
                        PulseSpec::Duration(d) => d,
                    };
                    grid = apply_pulse(&grid, &field, duration)?;
                    clock += duration;
                }
                SequenceEvent::Push {
                    duration,
                    efficiency,
                    temperature_factor,
                } => {
                    let heated = CloudConfig {
                        temperature_uk: self.cloud.temperature_uk * temperature_factor,
                        ..self.cloud.clone()
                    };
                    grid = ballistic_blur(&deplete_f2(&grid, efficiency)?, duration, &heated)?;
                    clock += duration;
                }
                SequenceEvent::Repump { duration } => {
                    grid = ballistic_blur(&repump(&grid), duration, &self.cloud)?;
                    clock += duration;
                }
                SequenceEvent::Wait { duration } => {
                    grid = ballistic_blur(&grid, duration, &self.cloud)?;
                    clock += duration;
                }
                SequenceEvent::Image => {
                    let n2 = Profile {
                        x0: grid.x0,
                        dx: grid.dx,
                        values: grid.n2.clone(),
                    };
                    let mut frame = add_shot_noise(&image_density(&n2, &self.imaging)?, &self.imaging, noise_rng)?;
                    frame.meta.clock_us = s_to_us(clock);
                    return Ok(frame);
                }
            }
        }
        unreachable!("validated sequences end with an image event")
    }

    /// Shot `k` of a multi-shot run, using stream `k` for both the phase draw
    /// and the detector noise.
    pub fn run_indexed_shot(&self, shots: &ShotModel, k: usize) -> Result<ImageFrame> {
        let mut rng = shots.shot_rng(k);
        let phase = shots.draw_phase(&mut rng);
        let mut frame = self.run_shot(phase, &mut rng)?;
        frame.meta.shot = Some(k);
        Ok(frame)
    }

    /// Runs all shots (in parallel) and averages them pixelwise in shot order.
    pub fn run(&self, shots: &ShotModel) -> Result<ExperimentOutput> {
        shots.validate()?;
        self.validate()?;
        let frames = (0..shots.num_shots)
            .into_par_iter()
            .map(|k| self.run_indexed_shot(shots, k))
            .collect::<Result<Vec<_>>>()?;
        let average = average_frames(&frames)?;
        Ok(ExperimentOutput { average, shots: frames })
    }
}

/// Pixelwise mean of frames sharing one pixel grid, summed in slice order.
pub fn average_frames(frames: &[ImageFrame]) -> Result<ImageFrame> {
    let first = frames
        .first()
        .ok_or_else(|| Error::domain("cannot average zero frames"))?;
    let mut acc = vec![0.0; first.len()];
    let mut saturated = Vec::new();
    for f in frames {
        if f.pixel_centers != first.pixel_centers {
            return Err(Error::domain("frames have different pixel grids"));
        }
        acc.iter_mut().zip(&f.od_values).for_each(|(a, v)| *a += v);
        saturated.extend_from_slice(&f.saturated);
    }
    let n = frames.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    saturated.sort_unstable();
    saturated.dedup();
    Ok(ImageFrame {
        pixel_centers: first.pixel_centers.clone(),
        od_values: acc,
        saturated,
        meta: FrameMeta {
            shot: None,
            clock_us: first.meta.clock_us,
            config_digest: first.meta.config_digest.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn experiment(sequence: Vec<SequenceEvent>) -> Experiment {
        Experiment {
            field: FieldConfig::default(),
            cloud: CloudConfig::default(),
            grid: GridSpec::default(),
            imaging: ImagingConfig::default(),
            sequence,
        }
    }

    fn no_rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn sequence_validation() {
        assert!(validate_sequence(&[]).is_err());
        assert!(validate_sequence(&[SequenceEvent::pulse_area(1.0)]).is_err());
        assert!(validate_sequence(&[SequenceEvent::Image, SequenceEvent::Image]).is_err());
        assert!(validate_sequence(&[SequenceEvent::Image, SequenceEvent::pulse_area(1.0)]).is_err());
        assert!(validate_sequence(&[SequenceEvent::pulse_area(-1.0), SequenceEvent::Image]).is_err());
        assert!(validate_sequence(&[SequenceEvent::Wait { duration: -1.0 }, SequenceEvent::Image]).is_err());
        assert!(validate_sequence(&[SequenceEvent::pulse_area(1.0), SequenceEvent::Image]).is_ok());
    }

    #[test]
    fn fresh_cloud_images_dark() {
        let f = experiment(vec![SequenceEvent::Image]).run_shot(0.0, &mut no_rng()).unwrap();
        assert!(f.od_values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn repumped_cloud_images_at_peak_od() {
        let exp = experiment(vec![SequenceEvent::Repump { duration: 0.0 }, SequenceEvent::Image]);
        let f = exp.run_shot(0.0, &mut no_rng()).unwrap();
        let peak = f.od_values.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.3).abs() < 1e-3, "{peak}");
    }

    #[test]
    fn clock_accumulates() {
        let exp = experiment(vec![
            SequenceEvent::pulse_area(1.0),
            SequenceEvent::push(),
            SequenceEvent::Wait { duration: 5e-6 },
            SequenceEvent::repump(),
            SequenceEvent::Image,
        ]);
        let f = exp.run_shot(0.0, &mut no_rng()).unwrap();
        let t1 = area_to_duration(1.0, &exp.field).unwrap();
        assert!((f.meta.clock_us - (t1 * 1e6 + 35.0)).abs() < 1e-9);
    }

    #[test]
    fn zero_wait_is_a_no_op() {
        let a = experiment(vec![SequenceEvent::pulse_area(1.0), SequenceEvent::Image]);
        let b = experiment(vec![
            SequenceEvent::Wait { duration: 0.0 },
            SequenceEvent::pulse_area(1.0),
            SequenceEvent::Wait { duration: 0.0 },
            SequenceEvent::Image,
        ]);
        assert_eq!(
            a.run_shot(0.3, &mut no_rng()).unwrap(),
            b.run_shot(0.3, &mut no_rng()).unwrap()
        );
    }

    #[test]
    fn trivial_push_only_clears_coherence() {
        // Coherence does not reach the image, so the frames agree exactly.
        let null_push = SequenceEvent::Push {
            duration: 0.0,
            efficiency: 0.0,
            temperature_factor: 1.0,
        };
        let a = experiment(vec![SequenceEvent::pulse_area(0.5), SequenceEvent::Image]);
        let b = experiment(vec![SequenceEvent::pulse_area(0.5), null_push, SequenceEvent::Image]);
        assert_eq!(
            a.run_shot(0.0, &mut no_rng()).unwrap().od_values,
            b.run_shot(0.0, &mut no_rng()).unwrap().od_values
        );
    }

    #[test]
    fn shot_streams_are_counter_based() {
        let shots = ShotModel {
            num_shots: 5,
            phase_jitter_rms: 0.4,
            seed: 99,
            ..ShotModel::default()
        };
        let phases: Vec<f64> = (0..5).map(|k| shots.shot_phase(k)).collect();
        let again: Vec<f64> = (0..5).map(|k| shots.shot_phase(k)).collect();
        assert_eq!(phases, again);
        assert!(phases.windows(2).all(|w| w[0] != w[1]));
        let other = ShotModel { seed: 100, ..shots.clone() };
        assert_ne!(other.shot_phase(0), phases[0]);
    }

    #[test]
    fn uniform_drift_is_bounded() {
        let shots = ShotModel {
            phase_jitter_rms: 0.5,
            jitter_kind: JitterKind::UniformDrift,
            ..ShotModel::default()
        };
        let bound = 0.5 * 3f64.sqrt();
        let draws: Vec<f64> = (0..2000).map(|k| shots.shot_phase(k)).collect();
        assert!(draws.iter().all(|p| p.abs() <= bound));
        let rms = (draws.iter().map(|p| p * p).sum::<f64>() / draws.len() as f64).sqrt();
        assert!((rms - 0.5).abs() < 0.03);
    }

    #[test]
    fn zero_jitter_average_equals_each_shot() {
        let exp = experiment(vec![SequenceEvent::pulse_area(2.0), SequenceEvent::Image]);
        let shots = ShotModel {
            num_shots: 4,
            ..ShotModel::default()
        };
        let out = exp.run(&shots).unwrap();
        for s in &out.shots {
            for (a, b) in s.od_values.iter().zip(&out.average.od_values) {
                assert!((a - b).abs() <= 1e-15 * a.abs().max(1e-300));
            }
        }
    }

    #[test]
    fn extending_shot_count_keeps_earlier_shots() {
        let exp = experiment(vec![SequenceEvent::pulse_area(1.0), SequenceEvent::Image]);
        let mut shots = ShotModel {
            num_shots: 3,
            phase_jitter_rms: 0.3,
            seed: 5,
            ..ShotModel::default()
        };
        let a = exp.run(&shots).unwrap();
        shots.num_shots = 4;
        let b = exp.run(&shots).unwrap();
        assert_eq!(a.shots[..], b.shots[..3]);
        assert_eq!(exp.run(&shots).unwrap(), b);
    }
}
