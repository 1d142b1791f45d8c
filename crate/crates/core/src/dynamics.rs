//! Coherent two-level evolution between F=1 and F=2.
//!
//! States are kept as populations plus the F=1/F=2 coherence `ρ₁₂`. The
//! Bloch vector is `(u, v, w) = (2 Re ρ₁₂, 2 Im ρ₁₂, p₂ − p₁)` and evolves as
//! `dr/dt = (Ω, 0, δ) × r`, so an atom starting in F=1 (south pole) under a
//! resonant drive reaches F=2 after `Ω·t = π`.
//!
//! [`propagate_constant`] applies the closed-form rotation. [`propagate_timedep`]
//! integrates arbitrary sampled drives with a fixed-step fourth-order Magnus
//! scheme acting on the 2×2 density matrix; for constant drives the two must
//! agree to round-off.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::ensemble::StateGrid;
use crate::field::{generalized_rabi, FieldConfig};
use crate::{Error, Result};

/// Numerical slack on population and positivity invariants.
pub const STATE_EPS: f64 = 1e-9;

/// Fraction of the fastest local rotation period used as the default step.
pub const STEPS_PER_PERIOD: f64 = 200.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalState {
    pub p1: f64,
    pub p2: f64,
    pub coh_re: f64,
    pub coh_im: f64,
}

impl LocalState {
    /// Fully in F=1, as after optical pumping.
    pub const F1: LocalState = LocalState {
        p1: 1.0,
        p2: 0.0,
        coh_re: 0.0,
        coh_im: 0.0,
    };

    pub fn norm(&self) -> f64 {
        self.p1 + self.p2
    }

    /// Checks `p ≥ 0`, `p₁+p₂ ≤ 1` and `|ρ₁₂|² ≤ p₁p₂` with [`STATE_EPS`] slack.
    pub fn is_physical(&self) -> bool {
        self.p1 >= -STATE_EPS
            && self.p2 >= -STATE_EPS
            && self.norm() <= 1.0 + STATE_EPS
            && self.coh_re * self.coh_re + self.coh_im * self.coh_im <= self.p1 * self.p2 + STATE_EPS
    }

    fn to_bloch(self) -> [f64; 4] {
        [2.0 * self.coh_re, 2.0 * self.coh_im, self.p2 - self.p1, self.p1 + self.p2]
    }

    fn from_bloch([u, v, w, n]: [f64; 4]) -> Self {
        LocalState {
            p1: 0.5 * (n - w),
            p2: 0.5 * (n + w),
            coh_re: 0.5 * u,
            coh_im: 0.5 * v,
        }
    }
}

/// Exact evolution under constant `(Ω, δ)` for `duration` seconds.
///
/// Works equally on density-weighted states (populations not normalised),
/// since the evolution is linear.
pub fn propagate_constant(state: LocalState, omega: f64, detuning: f64, duration: f64) -> Result<LocalState> {
    if !(duration >= 0.0) {
        return Err(Error::domain(format!("pulse duration must be ≥ 0, got {duration}")));
    }
    Ok(rotate(state, omega, detuning, duration))
}

#[inline]
fn rotate(state: LocalState, omega: f64, detuning: f64, duration: f64) -> LocalState {
    let rate = generalized_rabi(omega, detuning);
    let angle = rate * duration;
    if angle == 0.0 {
        return state;
    }
    let (kx, kz) = (omega / rate, detuning / rate);
    let [u, v, w, n] = state.to_bloch();
    let (s, c) = angle.sin_cos();
    // Rodrigues: r cosθ + (k × r) sinθ + k (k·r)(1 − cosθ), with k = (kx, 0, kz)
    let kdotr = kx * u + kz * w;
    let cross = [-kz * v, kz * u - kx * w, kx * v];
    let one_c = 1.0 - c;
    LocalState::from_bloch([
        u * c + cross[0] * s + kx * kdotr * one_c,
        v * c + cross[1] * s,
        w * c + cross[2] * s + kz * kdotr * one_c,
        n,
    ])
}

/// A drive sampled on a uniform time grid starting at t = 0 and linearly
/// interpolated between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledDrive {
    pub dt: f64,
    pub samples: Vec<f64>,
}

impl SampledDrive {
    pub fn new(dt: f64, samples: Vec<f64>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::domain("a sampled drive needs at least two samples"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::domain(format!("drive sample spacing must be positive, got {dt}")));
        }
        Ok(SampledDrive { dt, samples })
    }

    pub fn constant(value: f64, duration: f64) -> Result<Self> {
        Self::new(duration, vec![value, value])
    }

    /// Samples `f` at `n + 1` points spanning `[0, duration]`.
    pub fn from_fn(duration: f64, n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = n.max(1);
        let dt = duration / n as f64;
        Self::new(dt, (0..=n).map(|i| f(i as f64 * dt)).collect())
    }

    pub fn duration(&self) -> f64 {
        self.dt * (self.samples.len() - 1) as f64
    }

    pub fn value(&self, t: f64) -> f64 {
        let last = self.samples.len() - 1;
        let pos = (t / self.dt).clamp(0.0, last as f64);
        let i = (pos.floor() as usize).min(last - 1);
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }

    /// Trapezoidal integral of the interpolant.
    pub fn area(&self) -> f64 {
        let inner: f64 = self.samples[1..self.samples.len() - 1].iter().sum();
        self.dt * (inner + 0.5 * (self.samples[0] + self.samples[self.samples.len() - 1]))
    }
}

/// Default integrator step for a maximum local generalized Rabi frequency.
pub fn default_step(max_rate: f64) -> f64 {
    TAU / max_rate / STEPS_PER_PERIOD
}

type Mat2 = [[Complex64; 2]; 2];

/// Integrates time-dependent drives with the two-point Gauss–Legendre Magnus
/// expansion (fourth order). Each step is an exact SU(2) conjugation, so the
/// trace and positivity are preserved up to round-off. The step is shrunk so
/// that an integer number of steps spans the drive duration.
pub fn propagate_timedep(
    state: LocalState,
    omega: &SampledDrive,
    detuning: &SampledDrive,
    step: f64,
) -> Result<LocalState> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain(format!("integrator step must be positive, got {step}")));
    }
    let duration = omega.duration();
    if (detuning.duration() - duration).abs() > 1e-12 * duration.max(f64::MIN_POSITIVE) {
        return Err(Error::domain(format!(
            "drive durations differ: {duration} s vs {} s",
            detuning.duration()
        )));
    }
    let steps = (duration / step).ceil().max(1.0) as usize;
    let h = duration / steps as f64;
    let gl = 3f64.sqrt() / 6.0;
    let (c1, c2) = (0.5 - gl, 0.5 + gl);

    let mut rho = density_matrix(state);
    for k in 0..steps {
        let t0 = k as f64 * h;
        let a1 = [omega.value(t0 + c1 * h), 0.0, detuning.value(t0 + c1 * h)];
        let a2 = [omega.value(t0 + c2 * h), 0.0, detuning.value(t0 + c2 * h)];
        // Ω_M = h/2 (A₁ + A₂) + (√3/12) h² [A₂, A₁]; for so(3) generators the
        // commutator is the cross product of the rotation vectors.
        let comm = cross(a2, a1);
        let k2 = 3f64.sqrt() / 12.0 * h * h;
        let m = [
            0.5 * h * (a1[0] + a2[0]) + k2 * comm[0],
            0.5 * h * (a1[1] + a2[1]) + k2 * comm[1],
            0.5 * h * (a1[2] + a2[2]) + k2 * comm[2],
        ];
        rho = conjugate(&su2(m), &rho);
    }
    Ok(from_density_matrix(&rho))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

// Basis ordering (|2⟩, |1⟩) so that σ_z = diag(1, −1) measures p₂ − p₁.
fn density_matrix(s: LocalState) -> Mat2 {
    let c = Complex64::new(s.coh_re, s.coh_im);
    [
        [Complex64::new(s.p2, 0.0), c.conj()],
        [c, Complex64::new(s.p1, 0.0)],
    ]
}

fn from_density_matrix(rho: &Mat2) -> LocalState {
    LocalState {
        p1: rho[1][1].re,
        p2: rho[0][0].re,
        coh_re: rho[1][0].re,
        coh_im: rho[1][0].im,
    }
}

/// `exp(−i m·σ / 2)`.
fn su2(m: [f64; 3]) -> Mat2 {
    let angle = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
    if angle == 0.0 {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        return [[one, zero], [zero, one]];
    }
    let (s, c) = (0.5 * angle).sin_cos();
    let (kx, ky, kz) = (m[0] / angle, m[1] / angle, m[2] / angle);
    // c·I − i s (k·σ)
    [
        [Complex64::new(c, -s * kz), Complex64::new(-s * ky, -s * kx)],
        [Complex64::new(s * ky, -s * kx), Complex64::new(c, s * kz)],
    ]
}

fn conjugate(u: &Mat2, rho: &Mat2) -> Mat2 {
    let mut tmp = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            tmp[i][j] = u[i][0] * rho[0][j] + u[i][1] * rho[1][j];
        }
    }
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = tmp[i][0] * u[j][0].conj() + tmp[i][1] * u[j][1].conj();
        }
    }
    out
}

/// Pulse duration for an area of `area_in_pi`·π, referenced to the
/// generalized Rabi frequency at an antinode, `sqrt(Ω⁰² + δ₂²)`.
pub fn area_to_duration(area_in_pi: f64, field: &FieldConfig) -> Result<f64> {
    if !(area_in_pi >= 0.0 && area_in_pi.is_finite()) {
        return Err(Error::domain(format!("pulse area must be ≥ 0, got {area_in_pi}π")));
    }
    Ok(area_in_pi * PI / field.antinode_generalized_rabi())
}

/// Applies a rectangular Raman pulse of `duration` seconds at every grid
/// position using the local `Ω(x)` and `δ_eff(x)`.
pub fn apply_pulse(grid: &StateGrid, field: &FieldConfig, duration: f64) -> Result<StateGrid> {
    if !(duration >= 0.0) {
        return Err(Error::domain(format!("pulse duration must be ≥ 0, got {duration}")));
    }
    grid.validate()?;
    let sampler = field.sampler()?;
    let mut out = grid.clone();
    if duration == 0.0 {
        return Ok(out);
    }
    let (x0, dx) = (grid.x0, grid.dx);
    let states: Vec<LocalState> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let x = x0 + i as f64 * dx;
            rotate(grid.local(i), sampler.rabi(x), sampler.detuning(x), duration)
        })
        .collect();
    for (i, s) in states.into_iter().enumerate() {
        out.set_local(i, s);
    }
    Ok(out)
}
