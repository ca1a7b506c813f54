//! Elliptic-beam model of the satellite down-link.
//!
//! A received beam is a randomly displaced, rotated and scaled ellipse. Its
//! parameters are sampled from a [`BeamStatistics`], integrated over the ground
//! aperture, and binned into a transmittance histogram ([`PdtHistogram`]).

mod pdt;
mod provider;
mod quadrature;
mod sampling;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{eigh, Matrix4};

pub use pdt::{pdt_histogram, PdtHistogram};
pub use provider::{
    beam_statistics_provider, BeamStatisticsProvider, DirectProvider, Direction,
    DownlinkConstants, DownlinkProvider,
};
pub use quadrature::{
    aperture_transmittance, circular_beam_transmittance, ApertureIntegrator, GaussLegendre,
    QuadratureSpec,
};
pub use sampling::{sample_beam_params, sample_one};
pub(crate) use sampling::sample_range;

/// Beam state at the receiver: centroid, semi-axes and orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BeamParams {
    x0_m: f64,
    y0_m: f64,
    w1_m: f64,
    w2_m: f64,
    orient_rad: f64,
}

impl BeamParams {
    pub fn new(x0_m: f64, y0_m: f64, w1_m: f64, w2_m: f64, orient_rad: f64) -> Result<Self> {
        if !(w1_m > 0.0 && w2_m > 0.0) || !w1_m.is_finite() || !w2_m.is_finite() {
            return Err(Error::domain(format!(
                "beam semi-axes must be positive and finite, got {w1_m} and {w2_m}"
            )));
        }
        if !(x0_m.is_finite() && y0_m.is_finite() && orient_rad.is_finite()) {
            return Err(Error::domain("beam centroid and orientation must be finite"));
        }
        Ok(Self {
            x0_m,
            y0_m,
            w1_m,
            w2_m,
            orient_rad,
        })
    }

    pub fn x0_m(&self) -> f64 {
        self.x0_m
    }

    pub fn y0_m(&self) -> f64 {
        self.y0_m
    }

    pub fn w1_m(&self) -> f64 {
        self.w1_m
    }

    pub fn w2_m(&self) -> f64 {
        self.w2_m
    }

    pub fn orient_rad(&self) -> f64 {
        self.orient_rad
    }
}

/// Scatterer density, turbulence strength and extinction for one weather condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmosphereCondition {
    pub label: String,
    pub n0_per_m3: f64,
    pub cn2_m_neg23: f64,
    pub extinction: f64,
}

/// Extinction used by the shipped presets when none is configured.
pub const DEFAULT_EXTINCTION: f64 = 0.6;

impl AtmosphereCondition {
    pub fn new(
        label: impl Into<String>,
        n0_per_m3: f64,
        cn2_m_neg23: f64,
        extinction: f64,
    ) -> Result<Self> {
        let c = Self {
            label: label.into(),
            n0_per_m3,
            cn2_m_neg23,
            extinction,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n0_per_m3 >= 0.0 && self.n0_per_m3.is_finite()) {
            return Err(Error::domain(format!(
                "condition {}: scatterer density {} must be >= 0",
                self.label, self.n0_per_m3
            )));
        }
        if !(self.cn2_m_neg23 > 0.0 && self.cn2_m_neg23.is_finite()) {
            return Err(Error::domain(format!(
                "condition {}: Cn2 {} must be > 0",
                self.label, self.cn2_m_neg23
            )));
        }
        if !(self.extinction > 0.0 && self.extinction <= 1.0) {
            return Err(Error::domain(format!(
                "condition {}: extinction {} outside (0, 1]",
                self.label, self.extinction
            )));
        }
        Ok(())
    }

    pub fn with_extinction(&self, extinction: f64) -> Result<Self> {
        Self::new(self.label.clone(), self.n0_per_m3, self.cn2_m_neg23, extinction)
    }

    /// The six weather presets `(label, n0 [m^-3], Cn2 [m^-2/3])`.
    pub const PRESETS: [(&'static str, f64, f64); 6] = [
        ("night1", 0.61, 1.12e-16),
        ("day1", 0.01, 1.64e-16),
        ("night2", 3.00, 5.50e-16),
        ("day2", 0.05, 8.00e-16),
        ("night3", 6.10, 1.10e-15),
        ("day3", 0.10, 1.60e-15),
    ];

    pub fn preset(label: &str) -> Option<Self> {
        Self::PRESETS
            .iter()
            .find(|(l, _, _)| *l == label)
            .map(|&(l, n0, cn2)| Self {
                label: l.to_string(),
                n0_per_m3: n0,
                cn2_m_neg23: cn2,
                extinction: DEFAULT_EXTINCTION,
            })
    }

    pub fn presets() -> Vec<Self> {
        Self::PRESETS
            .iter()
            .map(|(l, _, _)| Self::preset(l).expect("preset exists"))
            .collect()
    }
}

/// Joint normal law of `(x0, y0, Theta1, Theta2)` with `Theta_i = ln(W_i^2 / W0^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamStatistics {
    mean: [f64; 4],
    cov: [[f64; 4]; 4],
    w0_m: f64,
    // cov = factor * factor^T
    factor: [[f64; 4]; 4],
}

impl BeamStatistics {
    pub fn new(mean: [f64; 4], cov: [[f64; 4]; 4], w0_m: f64) -> Result<Self> {
        if !(w0_m > 0.0 && w0_m.is_finite()) {
            return Err(Error::domain(format!("initial beam waist {w0_m} must be positive")));
        }
        if mean.iter().chain(cov.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::domain("beam moments must be finite"));
        }
        let trace: f64 = (0..4).map(|i| cov[i][i]).sum();
        let tol = 1e-12 * trace.abs();
        for i in 0..4 {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > tol {
                    return Err(Error::domain(format!(
                        "beam covariance is not symmetric at ({i}, {j}): {} vs {}",
                        cov[i][j], cov[j][i]
                    )));
                }
            }
        }
        let eig = eigh(&Matrix4::from_real(cov))?;
        if eig.min() < -tol {
            return Err(Error::domain(format!(
                "beam covariance is not positive semidefinite (min eigenvalue {:e})",
                eig.min()
            )));
        }
        let mut factor = [[0.0; 4]; 4];
        for (k, &l) in eig.values.iter().enumerate() {
            let s = l.max(0.0).sqrt();
            for (i, row) in factor.iter_mut().enumerate() {
                row[k] = eig.vectors[(i, k)].re * s;
            }
        }
        Ok(Self {
            mean,
            cov,
            w0_m,
            factor,
        })
    }

    pub fn mean(&self) -> &[f64; 4] {
        &self.mean
    }

    pub fn cov(&self) -> &[[f64; 4]; 4] {
        &self.cov
    }

    pub fn w0_m(&self) -> f64 {
        self.w0_m
    }

    pub(crate) fn factor(&self) -> &[[f64; 4]; 4] {
        &self.factor
    }
}

/// Semi-axis from its log width: `w0 * exp(theta / 2)`.
pub fn widths_from_log(theta: f64, w0: f64) -> f64 {
    w0 * (0.5 * theta).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths_examples() {
        assert_eq!(widths_from_log(0.0, 0.15), 0.15);
        assert!((widths_from_log(2.0 * 2f64.ln(), 0.15) - 0.30).abs() < 1e-15);
        assert!((widths_from_log(1.0, 0.15) - 0.24731).abs() < 1e-5);
    }

    #[test]
    fn presets_match_table() {
        let d1 = AtmosphereCondition::preset("day1").unwrap();
        assert_eq!((d1.n0_per_m3, d1.cn2_m_neg23), (0.01, 1.64e-16));
        let n3 = AtmosphereCondition::preset("night3").unwrap();
        assert_eq!((n3.n0_per_m3, n3.cn2_m_neg23), (6.10, 1.10e-15));
        assert!(AtmosphereCondition::preset("fog").is_none());
        assert_eq!(AtmosphereCondition::presets().len(), 6);
    }

    #[test]
    fn condition_ranges() {
        assert!(AtmosphereCondition::new("x", -1.0, 1e-16, 0.5).is_err());
        assert!(AtmosphereCondition::new("x", 0.0, 0.0, 0.5).is_err());
        assert!(AtmosphereCondition::new("x", 0.0, 1e-16, 1.5).is_err());
        assert!(AtmosphereCondition::new("x", 0.0, 1e-16, 1.0).is_ok());
    }

    #[test]
    fn covariance_checks() {
        let mut cov = [[0.0; 4]; 4];
        cov[0][0] = 1.0;
        cov[1][1] = -0.5;
        assert!(BeamStatistics::new([0.0; 4], cov, 0.15).is_err());
        let mut cov = [[0.0; 4]; 4];
        cov[0][1] = 0.3;
        cov[0][0] = 1.0;
        cov[1][1] = 1.0;
        assert!(BeamStatistics::new([0.0; 4], cov, 0.15).is_err());
        cov[1][0] = 0.3;
        assert!(BeamStatistics::new([0.0; 4], cov, 0.15).is_ok());
        assert!(BeamStatistics::new([0.0; 4], [[0.0; 4]; 4], 0.15).is_ok());
    }
}
