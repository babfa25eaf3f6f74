//! Single-atom free-space light coupling at desk scale.
//!
//! The crate models a single trapped atom probed through a high-NA lens:
//!
//! * [`optics`]: ideal mode overlap Λ(u) from the focusing strength, its
//!   position dependence, and the Zeeman / AC Stark shifts of the probe line.
//! * [`spectra`]: stationary-atom transmission, backscattering and
//!   saturation lineshapes.
//! * [`thermal`]: harmonic-trap position sampling, recoil heating and
//!   Monte-Carlo averaged spectra.
//! * [`photon`]: synthetic detector counts, background correction, the
//!   scattered-photon estimator and rebinning by scattered photons.
//! * [`fitting`]: weighted Levenberg–Marquardt fits with covariance errors.
//! * [`config`] and [`artifact`]: run configuration and reproducible
//!   CSV/JSON outputs used by the command-line tool.

pub mod artifact;
pub mod config;
pub mod constants;
pub mod error;
pub mod fitting;
pub mod optics;
pub mod photon;
pub mod rng;
pub mod special;
pub mod spectra;
pub mod thermal;

pub use error::{Error, Result};
