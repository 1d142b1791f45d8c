//! Deterministic 1-D simulation of atom patterning by Rabi oscillations in a
//! standing-wave Raman field.
//!
//! The pipeline mirrors a cold-atom experiment: a Gaussian cloud prepared in
//! F=1 ([`ensemble`]) is driven by a spatially modulated two-photon coupling
//! ([`field`], [`dynamics`]), optionally depleted and repumped according to a
//! protocol ([`sequence`]), and finally recorded through an absorption-imaging
//! model ([`imaging`]). [`analysis`] extracts visibilities, periods, peak
//! widths and peak counts from the resulting frames.
//!
//! Units: positions and lengths are micrometres, times are seconds and
//! angular frequencies are rad/s. Configuration files use explicit unit
//! suffixes and are converted on load ([`config`]).

pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod ensemble;
mod error;
mod kernel;
pub mod field;
pub mod imaging;
pub mod io;
pub mod sequence;
pub mod units;

pub use error::{Error, Result};
