use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{AtmosphereCondition, BeamStatistics};
use crate::error::{Error, Result};
use crate::geometry::SatelliteGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Downlink,
    Uplink,
}

/// Source of the `(x0, y0, Theta1, Theta2)` moments for one link configuration.
pub trait BeamStatisticsProvider: Send + Sync {
    fn statistics(
        &self,
        cond: &AtmosphereCondition,
        geom: &SatelliteGeometry,
        w0_m: f64,
        wavelength_m: f64,
        direction: Direction,
    ) -> Result<BeamStatistics>;
}

/// Tunable constants of the down-link moment model.
///
/// The beam leaves the satellite with waist `W0`, spreads by diffraction over
/// the slant range and picks up extra broadening only inside the final
/// atmospheric path `h`:
///
/// - diffraction: `W_d^2 = W0^2 (1 + (L / z_R)^2)`, `z_R = pi W0^2 / lambda`;
/// - turbulence: `W_t^2 = turbulence_broadening * (2 h / (sqrt(3) k rho0))^2` with
///   coherence radius `rho0 = (1.46 Cn2 k^2 h)^(-3/5)`;
/// - scatterers: `W_s^2 = n0 sigma h (theta_s h)^2 / 3`.
///
/// The log-widths get `Var(Theta) = ln(1 + log_width_turbulence_gain * sigma_R^2
/// + log_width_scatter_gain * n0 sigma h)` with the Rytov variance
/// `sigma_R^2 = 1.23 Cn2 k^(7/6) h^(11/6)`, a mean chosen so that
/// `E[W^2] = W_d^2 + W_t^2 + W_s^2`, and correlation `log_width_correlation`.
/// The centroid variance per axis is
/// `(pointing_error_rad L)^2 + wander_coefficient Cn2 h^3 W_d^(-1/3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DownlinkConstants {
    pub pointing_error_rad: f64,
    pub wander_coefficient: f64,
    pub turbulence_broadening: f64,
    pub scatter_cross_section_m2: f64,
    pub scatter_angle_rad: f64,
    pub log_width_turbulence_gain: f64,
    pub log_width_scatter_gain: f64,
    pub log_width_correlation: f64,
}

impl Default for DownlinkConstants {
    fn default() -> Self {
        Self {
            pointing_error_rad: 1e-6,
            wander_coefficient: 2.42,
            turbulence_broadening: 1.0,
            scatter_cross_section_m2: 1e-6,
            scatter_angle_rad: 1.6e-4,
            log_width_turbulence_gain: 0.01,
            log_width_scatter_gain: 0.5,
            log_width_correlation: -2.0 / 3.0,
        }
    }
}

impl DownlinkConstants {
    pub fn validate(&self) -> Result<()> {
        let non_negative = [
            ("pointing_error_rad", self.pointing_error_rad),
            ("wander_coefficient", self.wander_coefficient),
            ("turbulence_broadening", self.turbulence_broadening),
            ("scatter_cross_section_m2", self.scatter_cross_section_m2),
            ("scatter_angle_rad", self.scatter_angle_rad),
            ("log_width_turbulence_gain", self.log_width_turbulence_gain),
            ("log_width_scatter_gain", self.log_width_scatter_gain),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("provider.{name} must be >= 0, got {v}")));
            }
        }
        if !(-1.0..=1.0).contains(&self.log_width_correlation) {
            return Err(Error::Config(format!(
                "provider.log_width_correlation must lie in [-1, 1], got {}",
                self.log_width_correlation
            )));
        }
        Ok(())
    }
}

/// Down-link moment model driven by [`DownlinkConstants`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DownlinkProvider {
    pub constants: DownlinkConstants,
}

impl DownlinkProvider {
    pub fn new(constants: DownlinkConstants) -> Result<Self> {
        constants.validate()?;
        Ok(Self { constants })
    }
}

impl BeamStatisticsProvider for DownlinkProvider {
    fn statistics(
        &self,
        cond: &AtmosphereCondition,
        geom: &SatelliteGeometry,
        w0_m: f64,
        wavelength_m: f64,
        direction: Direction,
    ) -> Result<BeamStatistics> {
        if direction != Direction::Downlink {
            return Err(Error::Config(
                "the default moment provider only models the down-link; supply [moments] for \
                 other directions"
                    .into(),
            ));
        }
        if !(wavelength_m > 0.0 && w0_m > 0.0) {
            return Err(Error::domain(format!(
                "wavelength {wavelength_m} m and beam waist {w0_m} m must be positive"
            )));
        }
        let c = &self.constants;
        let k = 2.0 * PI / wavelength_m;
        let slant = geom.slant_range_km() * 1e3;
        let h = geom.atmospheric_path_km() * 1e3;
        let cn2 = cond.cn2_m_neg23;

        let z_r = PI * w0_m * w0_m / wavelength_m;
        let w_diff2 = w0_m * w0_m * (1.0 + (slant / z_r).powi(2));
        // (2h / (sqrt(3) k rho0))^2 with rho0^-2 = (1.46 Cn2 k^2 h)^(6/5)
        let w_turb2 = c.turbulence_broadening * 4.0 * h * h / (3.0 * k * k)
            * (1.46 * cn2 * k * k * h).powf(1.2);
        let optical_depth = cond.n0_per_m3 * c.scatter_cross_section_m2 * h;
        let w_scat2 = optical_depth * (c.scatter_angle_rad * h).powi(2) / 3.0;
        let w_mean2 = w_diff2 + w_turb2 + w_scat2;

        let rytov = 1.23 * cn2 * k.powf(7.0 / 6.0) * h.powf(11.0 / 6.0);
        let var_theta = (c.log_width_turbulence_gain * rytov
            + c.log_width_scatter_gain * optical_depth)
            .ln_1p();
        let mean_theta = (w_mean2 / (w0_m * w0_m)).ln() - 0.5 * var_theta;
        let cov_theta = c.log_width_correlation * var_theta;

        let var_centroid = (c.pointing_error_rad * slant).powi(2)
            + c.wander_coefficient * cn2 * h.powi(3) * w_diff2.powf(-1.0 / 6.0);

        let mut cov = [[0.0; 4]; 4];
        cov[0][0] = var_centroid;
        cov[1][1] = var_centroid;
        cov[2][2] = var_theta;
        cov[3][3] = var_theta;
        cov[2][3] = cov_theta;
        cov[3][2] = cov_theta;
        BeamStatistics::new([0.0, 0.0, mean_theta, mean_theta], cov, w0_m)
    }
}

/// Moments taken verbatim from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectProvider {
    pub mean: [f64; 4],
    pub cov: [[f64; 4]; 4],
}

impl BeamStatisticsProvider for DirectProvider {
    fn statistics(
        &self,
        _cond: &AtmosphereCondition,
        _geom: &SatelliteGeometry,
        w0_m: f64,
        _wavelength_m: f64,
        _direction: Direction,
    ) -> Result<BeamStatistics> {
        BeamStatistics::new(self.mean, self.cov, w0_m)
    }
}

/// Moments from the default down-link model.
pub fn beam_statistics_provider(
    cond: &AtmosphereCondition,
    geom: &SatelliteGeometry,
    w0_m: f64,
    wavelength_m: f64,
    direction: Direction,
) -> Result<BeamStatistics> {
    DownlinkProvider::default().statistics(cond, geom, w0_m, wavelength_m, direction)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beam::{aperture_transmittance, sample_beam_params};

    fn zenith(deg: f64) -> SatelliteGeometry {
        SatelliteGeometry::from_degrees(500.0, deg, 20.0).unwrap()
    }

    #[test]
    fn direct_is_passthrough() {
        let mut cov = [[0.0; 4]; 4];
        cov[2][2] = 0.3;
        let direct = DirectProvider {
            mean: [0.1, 0.2, 3.0, 3.1],
            cov,
        };
        let cond = AtmosphereCondition::preset("day1").unwrap();
        let s = direct
            .statistics(&cond, &zenith(10.0), 0.15, 1.55e-6, Direction::Uplink)
            .unwrap();
        assert_eq!(s.mean(), &direct.mean);
        assert_eq!(s.cov(), &direct.cov);
    }

    #[test]
    fn uplink_is_rejected() {
        let cond = AtmosphereCondition::preset("day1").unwrap();
        let err = beam_statistics_provider(&cond, &zenith(0.0), 0.15, 1.55e-6, Direction::Uplink);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn vacuum_limit_is_pure_diffraction() {
        let cond = AtmosphereCondition::new("vacuum", 0.0, 1e-40, 1.0).unwrap();
        let provider = DownlinkProvider::new(DownlinkConstants {
            pointing_error_rad: 0.0,
            ..DownlinkConstants::default()
        })
        .unwrap();
        let (w0, lambda) = (0.15, 1.55e-6);
        let s = provider
            .statistics(&cond, &zenith(0.0), w0, lambda, Direction::Downlink)
            .unwrap();
        let z_r = PI * w0 * w0 / lambda;
        let diffraction = (1.0 + (500e3 / z_r).powi(2)).ln();
        assert!((s.mean()[2] - diffraction).abs() < 1e-12);
        assert!(s.cov()[2][2].abs() < 1e-15);
        assert!(s.cov()[0][0].abs() < 1e-15);
    }

    #[test]
    fn clear_day_transmits_more_than_heavy_night() {
        let mean_eta = |label: &str| {
            let cond = AtmosphereCondition::preset(label).unwrap();
            let stats =
                beam_statistics_provider(&cond, &zenith(0.0), 0.15, 1.55e-6, Direction::Downlink)
                    .unwrap();
            let samples = sample_beam_params(&stats, 400, 5).unwrap();
            samples
                .iter()
                .map(|v| aperture_transmittance(v, 0.5, cond.extinction).unwrap())
                .sum::<f64>()
                / samples.len() as f64
        };
        assert!(mean_eta("day1") > mean_eta("night3"));
    }
}
