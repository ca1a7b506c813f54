//! Asymptotic key rates of phase-matching MDI-QKD over a hybrid link made of a
//! ground fiber arm and a satellite down-link.
//!
//! The crate is organised the way a run flows:
//!
//! - [`geometry`]: zenith angle, slant range and fiber loss.
//! - [`beam`]: elliptic-beam sampling, aperture transmittance and PDT histograms.
//! - [`keyrate`]: loss-only and noisy key rates.
//! - [`optimizer`]: maximisation over the signal intensity.
//! - [`scan`]: AKR versus zenith angle, transmittance versus beam width, PDR.
//! - [`config`] and [`app`]: TOML run configuration and the command runners
//!   behind the `pmqkd` binary.

pub mod app;
pub mod beam;
pub mod config;
pub mod error;
pub mod geometry;
pub mod keyrate;
pub mod linalg;
pub mod optimizer;
pub mod scan;

pub use error::{Error, Result};
