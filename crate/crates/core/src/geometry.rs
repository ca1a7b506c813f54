//! Flat-earth link geometry for the satellite down-link and the fiber arm.
//!
//! The slant range and the path through the turbulent layer both scale with
//! `sec(zenith)`; fiber loss is a fixed attenuation in dB/km.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

pub const DEFAULT_FIBER_ATTENUATION_DB_PER_KM: f64 = 0.2;

/// Satellite altitude, zenith angle and effective atmosphere thickness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatelliteGeometry {
    satellite_altitude_km: f64,
    zenith_angle_rad: f64,
    atmosphere_thickness_km: f64,
}

impl SatelliteGeometry {
    pub fn new(
        satellite_altitude_km: f64,
        zenith_angle_rad: f64,
        atmosphere_thickness_km: f64,
    ) -> Result<Self> {
        if !(zenith_angle_rad >= 0.0 && zenith_angle_rad < FRAC_PI_2) {
            return Err(Error::domain(format!(
                "zenith angle {zenith_angle_rad} rad outside [0, pi/2): secant diverges"
            )));
        }
        if !(atmosphere_thickness_km > 0.0 && satellite_altitude_km > atmosphere_thickness_km) {
            return Err(Error::domain(format!(
                "need altitude > atmosphere thickness > 0, got {satellite_altitude_km} km and \
                 {atmosphere_thickness_km} km"
            )));
        }
        Ok(Self {
            satellite_altitude_km,
            zenith_angle_rad,
            atmosphere_thickness_km,
        })
    }

    pub fn from_degrees(
        satellite_altitude_km: f64,
        zenith_deg: f64,
        atmosphere_thickness_km: f64,
    ) -> Result<Self> {
        Self::new(
            satellite_altitude_km,
            zenith_deg.to_radians(),
            atmosphere_thickness_km,
        )
    }

    pub fn satellite_altitude_km(&self) -> f64 {
        self.satellite_altitude_km
    }

    pub fn zenith_angle_rad(&self) -> f64 {
        self.zenith_angle_rad
    }

    pub fn atmosphere_thickness_km(&self) -> f64 {
        self.atmosphere_thickness_km
    }

    fn secant(&self) -> f64 {
        1.0 / self.zenith_angle_rad.cos()
    }

    /// Satellite-to-ground distance, `altitude * sec(zenith)`.
    pub fn slant_range_km(&self) -> f64 {
        self.satellite_altitude_km * self.secant()
    }

    /// Length of the slant path inside the atmosphere layer, `thickness * sec(zenith)`.
    pub fn atmospheric_path_km(&self) -> f64 {
        self.atmosphere_thickness_km * self.secant()
    }
}

pub fn slant_range(geom: &SatelliteGeometry) -> f64 {
    geom.slant_range_km()
}

pub fn atmospheric_path(geom: &SatelliteGeometry) -> f64 {
    geom.atmospheric_path_km()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiberLink {
    length_km: f64,
    attenuation_db_per_km: f64,
}

impl FiberLink {
    pub fn new(length_km: f64, attenuation_db_per_km: f64) -> Result<Self> {
        if !(length_km >= 0.0) || !length_km.is_finite() {
            return Err(Error::domain(format!("fiber length {length_km} km must be >= 0")));
        }
        if !(attenuation_db_per_km > 0.0) {
            return Err(Error::domain(format!(
                "fiber attenuation {attenuation_db_per_km} dB/km must be > 0"
            )));
        }
        Ok(Self {
            length_km,
            attenuation_db_per_km,
        })
    }

    /// Standard telecom fiber at 0.2 dB/km.
    pub fn standard(length_km: f64) -> Result<Self> {
        Self::new(length_km, DEFAULT_FIBER_ATTENUATION_DB_PER_KM)
    }

    pub fn length_km(&self) -> f64 {
        self.length_km
    }

    pub fn attenuation_db_per_km(&self) -> f64 {
        self.attenuation_db_per_km
    }

    pub fn transmittance(&self) -> f64 {
        10f64.powf(-self.attenuation_db_per_km * self.length_km / 10.0)
    }
}

pub fn fiber_transmittance(link: &FiberLink) -> f64 {
    link.transmittance()
}

/// Fiber length whose transmittance equals `eta` at the given attenuation.
pub fn fiber_length_for_transmittance(eta: f64, attenuation_db_per_km: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("transmittance {eta} outside (0, 1]")));
    }
    if !(attenuation_db_per_km > 0.0) {
        return Err(Error::domain(format!(
            "fiber attenuation {attenuation_db_per_km} dB/km must be > 0"
        )));
    }
    // -0.0 for eta == 1
    Ok((-10.0 * eta.log10() / attenuation_db_per_km).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn geom(deg: f64) -> SatelliteGeometry {
        SatelliteGeometry::from_degrees(500.0, deg, 20.0).unwrap()
    }

    #[test]
    fn slant_range_examples() {
        assert_relative_eq!(geom(0.0).slant_range_km(), 500.0, max_relative = 1e-15);
        assert_relative_eq!(geom(60.0).slant_range_km(), 1000.0, max_relative = 1e-12);
        // 500 / cos(75 deg)
        assert_relative_eq!(geom(75.0).slant_range_km(), 1_931.851_652_578_136_6, max_relative = 1e-12);
    }

    #[test]
    fn atmospheric_path_examples() {
        assert_relative_eq!(geom(0.0).atmospheric_path_km(), 20.0, max_relative = 1e-15);
        assert_relative_eq!(geom(60.0).atmospheric_path_km(), 40.0, max_relative = 1e-12);
        assert_relative_eq!(geom(45.0).atmospheric_path_km(), 20.0 * 2f64.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn horizon_and_bad_layers_are_rejected() {
        assert!(matches!(SatelliteGeometry::from_degrees(500.0, 90.0, 20.0), Err(Error::Domain(_))));
        assert!(SatelliteGeometry::from_degrees(500.0, -1.0, 20.0).is_err());
        assert!(SatelliteGeometry::from_degrees(20.0, 0.0, 20.0).is_err());
        assert!(SatelliteGeometry::from_degrees(500.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn fiber_examples() {
        assert_eq!(FiberLink::standard(0.0).unwrap().transmittance(), 1.0);
        assert_relative_eq!(FiberLink::standard(50.0).unwrap().transmittance(), 0.1, max_relative = 1e-14);
        assert_relative_eq!(
            FiberLink::standard(115.0).unwrap().transmittance(),
            10f64.powf(-2.3),
            max_relative = 1e-14
        );
        assert_relative_eq!(FiberLink::standard(115.0).unwrap().transmittance(), 5.0119e-3, max_relative = 1e-4);
        assert!(FiberLink::standard(-1.0).is_err());
        assert!(FiberLink::new(1.0, 0.0).is_err());
    }

    #[test]
    fn inverse_fiber_examples() {
        assert_eq!(fiber_length_for_transmittance(1.0, 0.2).unwrap(), 0.0);
        assert_relative_eq!(fiber_length_for_transmittance(0.1, 0.2).unwrap(), 50.0, max_relative = 1e-14);
        assert_relative_eq!(fiber_length_for_transmittance(5.0119e-3, 0.2).unwrap(), 115.0, max_relative = 1e-4);
        assert!(fiber_length_for_transmittance(0.0, 0.2).is_err());
        assert!(fiber_length_for_transmittance(1.5, 0.2).is_err());
        assert!(fiber_length_for_transmittance(-0.1, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn fiber_round_trip(len in 0.0f64..500.0) {
            let eta = FiberLink::standard(len).unwrap().transmittance();
            let back = fiber_length_for_transmittance(eta, 0.2).unwrap();
            prop_assert!((back - len).abs() <= 1e-9);
        }

        #[test]
        fn slant_over_atmosphere_is_constant(deg in 0.0f64..89.0) {
            let g = geom(deg);
            let ratio = g.slant_range_km() / g.atmospheric_path_km();
            prop_assert!((ratio - 25.0).abs() <= 1e-12);
        }

        #[test]
        fn paths_increase_with_zenith(a in 0.0f64..75.0, b in 0.0f64..75.0) {
            prop_assume!(a < b);
            prop_assert!(geom(a).slant_range_km() < geom(b).slant_range_km());
            prop_assert!(geom(a).atmospheric_path_km() < geom(b).atmospheric_path_km());
        }
    }
}
