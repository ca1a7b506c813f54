//! Experiments built from the channel and key-rate pieces: average key rate
//! versus zenith angle with a matched fiber arm, mean transmittance versus
//! initial beam width, and the distribution of average key rates.
//!
//! Parallel loops always collect in index order and reduce sequentially, so
//! results are bit-identical for any number of worker threads.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::beam::{
    pdt_histogram, sample_range, ApertureIntegrator, AtmosphereCondition, BeamParams,
    BeamStatistics, BeamStatisticsProvider, DirectProvider, Direction, DownlinkConstants,
    DownlinkProvider, PdtHistogram, QuadratureSpec,
};
use crate::error::{Error, Result, StageExt};
use crate::geometry::{
    fiber_length_for_transmittance, FiberLink, SatelliteGeometry,
    DEFAULT_FIBER_ATTENUATION_DB_PER_KM,
};
use crate::keyrate::{lossonly_keyrate, noisy_keyrate, total_transmittance, ImperfectionParams};
use crate::optimizer::{optimize_intensity, OptimizationSpec, Optimum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    LossOnly,
    Noisy,
}

impl Scenario {
    /// PDR rounding digits used when none are configured.
    pub fn default_round_digits(self) -> u32 {
        match self {
            Scenario::LossOnly => 6,
            Scenario::Noisy => 7,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scenario::LossOnly => "loss-only",
            Scenario::Noisy => "noisy",
        }
    }
}

/// Statistic of the satellite PDT that the fiber arm is matched to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Matching {
    #[default]
    Mean,
    Median,
    Mode,
}

/// Where beam moments come from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentSource {
    Downlink(DownlinkConstants),
    Direct(DirectProvider),
}

impl Default for MomentSource {
    fn default() -> Self {
        MomentSource::Downlink(DownlinkConstants::default())
    }
}

impl MomentSource {
    pub fn statistics(
        &self,
        cond: &AtmosphereCondition,
        geom: &SatelliteGeometry,
        w0_m: f64,
        wavelength_m: f64,
        direction: Direction,
    ) -> Result<BeamStatistics> {
        match self {
            MomentSource::Downlink(c) => {
                DownlinkProvider::new(*c)?.statistics(cond, geom, w0_m, wavelength_m, direction)
            }
            MomentSource::Direct(d) => d.statistics(cond, geom, w0_m, wavelength_m, direction),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtinctionOverride {
    pub zenith_deg: f64,
    pub extinction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSpec {
    pub condition: AtmosphereCondition,
    pub zenith_grid_deg: Vec<f64>,
    pub samples_per_point: usize,
    pub n_bins: usize,
    pub seed: u64,
    pub scenario: Scenario,
    pub imperfections: ImperfectionParams,
    pub aperture_radius_m: f64,
    pub w0_m: f64,
    pub wavelength_m: f64,
    pub satellite_altitude_km: f64,
    pub atmosphere_thickness_km: f64,
    pub attenuation_db_per_km: f64,
    pub direction: Direction,
    pub matching: Matching,
    pub extinction_overrides: Vec<ExtinctionOverride>,
    pub moments: MomentSource,
    pub optimizer: OptimizationSpec,
    pub quadrature: QuadratureSpec,
}

/// Zenith grid used when none is configured: 0 to 75 degrees in steps of 5.
pub fn default_zenith_grid() -> Vec<f64> {
    (0..16).map(|i| 5.0 * i as f64).collect()
}

impl ScanSpec {
    pub fn new(condition: AtmosphereCondition, scenario: Scenario, seed: u64) -> Self {
        Self {
            condition,
            zenith_grid_deg: default_zenith_grid(),
            samples_per_point: 1000,
            n_bins: 100,
            seed,
            scenario,
            imperfections: ImperfectionParams::calibrated(),
            aperture_radius_m: 0.5,
            w0_m: 0.15,
            wavelength_m: 1.55e-6,
            satellite_altitude_km: 500.0,
            atmosphere_thickness_km: 20.0,
            attenuation_db_per_km: DEFAULT_FIBER_ATTENUATION_DB_PER_KM,
            direction: Direction::Downlink,
            matching: Matching::Mean,
            extinction_overrides: Vec::new(),
            moments: MomentSource::default(),
            optimizer: OptimizationSpec::default(),
            quadrature: QuadratureSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.condition.validate()?;
        if self.samples_per_point == 0 {
            return Err(Error::Config("samples_per_point must be >= 1".into()));
        }
        if self.n_bins == 0 {
            return Err(Error::Config("n_bins must be >= 1".into()));
        }
        if let Some(z) = self
            .zenith_grid_deg
            .iter()
            .find(|z| !(0.0..=75.0).contains(*z))
        {
            return Err(Error::Config(format!("zenith angle {z} deg outside [0, 75]")));
        }
        for (name, v) in [
            ("aperture_radius_m", self.aperture_radius_m),
            ("w0_m", self.w0_m),
            ("wavelength_m", self.wavelength_m),
            ("attenuation_db_per_km", self.attenuation_db_per_km),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for o in &self.extinction_overrides {
            if !(o.extinction > 0.0 && o.extinction <= 1.0) {
                return Err(Error::Config(format!(
                    "extinction override {} at {} deg outside (0, 1]",
                    o.extinction, o.zenith_deg
                )));
            }
        }
        if self.scenario == Scenario::Noisy {
            self.imperfections.validate()?;
        }
        self.optimizer.validate()?;
        ApertureIntegrator::new(self.quadrature)?;
        Ok(())
    }

    /// Extinction at `zenith_deg`: an exact-match override, else the condition's value.
    pub fn extinction_at(&self, zenith_deg: f64) -> f64 {
        self.extinction_overrides
            .iter()
            .find(|o| (o.zenith_deg - zenith_deg).abs() < 1e-9)
            .map(|o| o.extinction)
            .unwrap_or(self.condition.extinction)
    }

    pub fn geometry(&self, zenith_deg: f64) -> Result<SatelliteGeometry> {
        SatelliteGeometry::from_degrees(
            self.satellite_altitude_km,
            zenith_deg,
            self.atmosphere_thickness_km,
        )
    }

    /// Detector efficiency entering the total transmittance. The loss-only
    /// scenario models perfect detectors.
    pub fn detector_eff(&self) -> f64 {
        match self.scenario {
            Scenario::LossOnly => 1.0,
            Scenario::Noisy => self.imperfections.detector_eff,
        }
    }

    /// Key rate at satellite transmittance `eta_s`, fiber transmittance `eta_t`.
    pub fn rate(&self, eta_s: f64, eta_t: f64, mu: f64) -> Result<f64> {
        let eta = total_transmittance(eta_s, eta_t, self.detector_eff());
        match self.scenario {
            Scenario::LossOnly => Ok(lossonly_keyrate(eta, mu)),
            Scenario::Noisy => noisy_keyrate(eta, mu, &self.imperfections),
        }
    }

    /// Beam samples `start..start + n` and their transmittances at one zenith angle.
    pub fn sample_channel(
        &self,
        zenith_deg: f64,
        start: usize,
        n: usize,
    ) -> Result<(Vec<BeamParams>, Vec<f64>)> {
        let geom = self.geometry(zenith_deg)?;
        let chi = self.extinction_at(zenith_deg);
        let cond = self.condition.with_extinction(chi)?;
        let stats = self
            .moments
            .statistics(&cond, &geom, self.w0_m, self.wavelength_m, self.direction)
            .stage("beam statistics")?;
        let samples = sample_range(&stats, start, n, self.seed).stage("beam sampling")?;
        let integrator = ApertureIntegrator::new(self.quadrature)?;
        let etas = samples
            .par_iter()
            .map(|v| integrator.transmittance(v, self.aperture_radius_m, chi))
            .collect::<Result<Vec<_>>>()
            .stage("aperture transmittance")?;
        Ok((samples, etas))
    }

    /// Averaged rate over `pdt` with the intensity optimized once for the whole histogram.
    pub fn optimize_average(&self, pdt: &PdtHistogram, eta_t: f64) -> Result<Optimum> {
        let bins: Vec<(f64, f64)> = pdt.occupied().collect();
        optimize_intensity(
            |mu| {
                bins.iter()
                    .map(|&(eta_s, p)| Ok(p * self.rate(eta_s, eta_t, mu)?))
                    .sum::<Result<f64>>()
            },
            &self.optimizer,
        )
        .stage("intensity optimization")
    }
}

/// `sum_i rate(eta_i) P(eta_i)` over bin centers.
pub fn average_keyrate(pdt: &PdtHistogram, rate_fn: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    pdt.occupied().map(|(eta, p)| Ok(p * rate_fn(eta)?)).sum()
}

/// Representative transmittance of a PDT under `matching`.
pub fn representative_transmittance(pdt: &PdtHistogram, matching: Matching) -> f64 {
    match matching {
        Matching::Mean => pdt.mean(),
        Matching::Median => pdt.median(),
        Matching::Mode => pdt.mode(),
    }
}

/// Fiber length whose transmittance equals the PDT's representative value.
pub fn matched_fiber_length(
    pdt: &PdtHistogram,
    matching: Matching,
    attenuation_db_per_km: f64,
) -> Result<f64> {
    let eta = representative_transmittance(pdt, matching);
    if !(eta > 0.0) {
        return Err(Error::domain(
            "satellite transmittance is zero; no fiber length matches it",
        ));
    }
    fiber_length_for_transmittance(eta.min(1.0), attenuation_db_per_km)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AkrPoint {
    pub zenith_deg: f64,
    pub slant_km: f64,
    pub fiber_km: f64,
    pub mu_star: f64,
    pub akr: f64,
}

/// Everything computed at one zenith angle.
#[derive(Debug, Clone)]
pub struct ZenithRun {
    pub point: AkrPoint,
    pub samples: Vec<BeamParams>,
    pub etas: Vec<f64>,
    pub pdt: PdtHistogram,
}

fn akr_point(spec: &ScanSpec, zenith_deg: f64) -> Result<ZenithRun> {
    let geom = spec.geometry(zenith_deg)?;
    let (samples, etas) = spec.sample_channel(zenith_deg, 0, spec.samples_per_point)?;
    let pdt = pdt_histogram(&etas, spec.n_bins).stage("pdt histogram")?;
    let fiber_km =
        matched_fiber_length(&pdt, spec.matching, spec.attenuation_db_per_km).stage("fiber matching")?;
    let eta_t = FiberLink::new(fiber_km, spec.attenuation_db_per_km)?.transmittance();
    let opt = spec.optimize_average(&pdt, eta_t)?;
    Ok(ZenithRun {
        point: AkrPoint {
            zenith_deg,
            slant_km: geom.slant_range_km(),
            fiber_km,
            mu_star: opt.mu_star,
            akr: opt.rate_star.max(0.0),
        },
        samples,
        etas,
        pdt,
    })
}

/// Full per-zenith results, in grid order.
pub fn akr_scan_detailed(spec: &ScanSpec) -> Result<Vec<ZenithRun>> {
    spec.validate()?;
    spec.zenith_grid_deg
        .par_iter()
        .enumerate()
        .map(|(index, &z)| {
            akr_point(spec, z).map_err(|e| Error::AtZenith {
                index,
                zenith_deg: z,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Average key rate versus zenith angle with the fiber arm matched to the satellite arm.
pub fn akr_scan(spec: &ScanSpec) -> Result<Vec<AkrPoint>> {
    Ok(akr_scan_detailed(spec)?.into_iter().map(|r| r.point).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeamwidthRow {
    pub w0_m: f64,
    pub condition: String,
    pub mean_transmittance: f64,
}

/// Mean satellite transmittance for every `(condition, w0)` pair at the
/// zenith angle of `spec` (its first grid point, normally 0 degrees).
pub fn transmittance_vs_beamwidth(
    spec: &ScanSpec,
    conditions: &[AtmosphereCondition],
    w0_grid: &[f64],
) -> Result<Vec<BeamwidthRow>> {
    let zenith = spec.zenith_grid_deg.first().copied().unwrap_or(0.0);
    if let Some(w) = w0_grid.iter().find(|w| !(**w > 0.0 && **w <= 0.35)) {
        return Err(Error::Config(format!("initial beam width {w} m outside (0, 0.35]")));
    }
    let jobs: Vec<(&AtmosphereCondition, f64)> = conditions
        .iter()
        .flat_map(|c| w0_grid.iter().map(move |&w| (c, w)))
        .collect();
    jobs.par_iter()
        .map(|&(cond, w0)| {
            let mut s = spec.clone();
            s.condition = cond.clone();
            s.w0_m = w0;
            s.validate()?;
            let (_, etas) = s.sample_channel(zenith, 0, s.samples_per_point)?;
            Ok(BeamwidthRow {
                w0_m: w0,
                condition: cond.label.clone(),
                mean_transmittance: etas.iter().sum::<f64>() / etas.len() as f64,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdrResult {
    pub rate_values: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub round_digits: u32,
    pub batches: usize,
}

impl PdrResult {
    /// Width of the support along the rate axis.
    pub fn spread(&self) -> f64 {
        match (self.rate_values.first(), self.rate_values.last()) {
            (Some(lo), Some(hi)) => hi - lo,
            _ => 0.0,
        }
    }

    pub fn peak_probability(&self) -> f64 {
        self.probabilities.iter().copied().fold(0.0, f64::max)
    }
}

/// Half-even rounding of `value` to `digits` decimals, as an integer count of `10^-digits`.
pub fn round_half_even_units(value: f64, digits: u32) -> i64 {
    (value * 10f64.powi(digits as i32)).round_ties_even() as i64
}

/// Distribution of batch AKR values at a fixed zenith angle and fiber length.
///
/// `n_samples` beam samples are split into consecutive batches of
/// `spec.samples_per_point`; each batch gives one AKR with its own optimized
/// intensity, rounded half-even to `round_digits` decimals.
pub fn pdr(
    spec: &ScanSpec,
    zenith_deg: f64,
    fiber_km: f64,
    n_samples: usize,
    round_digits: u32,
) -> Result<PdrResult> {
    spec.validate()?;
    let batch = spec.samples_per_point;
    let batches = n_samples / batch;
    if batches == 0 {
        return Err(Error::Config(format!(
            "PDR needs at least one full batch: {n_samples} samples, batch size {batch}"
        )));
    }
    let eta_t = FiberLink::new(fiber_km, spec.attenuation_db_per_km)?.transmittance();
    let (_, etas) = spec.sample_channel(zenith_deg, 0, batches * batch)?;
    let values = etas
        .par_chunks(batch)
        .map(|chunk| {
            let pdt = pdt_histogram(chunk, spec.n_bins)?;
            Ok(spec.optimize_average(&pdt, eta_t)?.rate_star.max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut tally: BTreeMap<i64, usize> = BTreeMap::new();
    for v in values {
        *tally.entry(round_half_even_units(v, round_digits)).or_default() += 1;
    }
    let scale = 10f64.powi(round_digits as i32);
    Ok(PdrResult {
        rate_values: tally.keys().map(|&k| k as f64 / scale).collect(),
        probabilities: tally.values().map(|&c| c as f64 / batches as f64).collect(),
        round_digits,
        batches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_examples() {
        let point = PdtHistogram::from_weights(vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let got = average_keyrate(&point, |eta| Ok(eta * eta)).unwrap();
        assert_eq!(got, 0.625 * 0.625);
        let h = PdtHistogram::from_weights(vec![0.0, 0.3, 0.2, 0.5, 0.0]).unwrap();
        assert!((average_keyrate(&h, |_| Ok(1.0)).unwrap() - 1.0).abs() < 1e-15);
        let two = PdtHistogram::from_weights(vec![0.0, 0.0, 1.0, 0.0, 1.0]).unwrap();
        // bin width 0.2: centers 0.5 and 0.9
        assert!((average_keyrate(&two, Ok).unwrap() - 0.7).abs() < 1e-15);
        let ten = PdtHistogram::from_weights(vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        // centers 0.25 and 0.45 average to 0.35
        assert!((average_keyrate(&ten, Ok).unwrap() - 0.35).abs() < 1e-15);
    }

    #[test]
    fn fiber_matching() {
        // five bins: the first is centred at 0.1, i.e. 10 dB of fiber
        let w = vec![1.0, 0.0, 0.0, 0.0, 0.0];
        let h = PdtHistogram::from_weights(w.clone()).unwrap();
        let km = matched_fiber_length(&h, Matching::Mean, 0.2).unwrap();
        assert!((km - 50.0).abs() < 1e-9);
        let scaled = PdtHistogram::from_weights(w.iter().map(|x| 7.0 * x).collect()).unwrap();
        assert_eq!(
            matched_fiber_length(&scaled, Matching::Mean, 0.2).unwrap(),
            km
        );
    }

    #[test]
    fn half_even_rounding() {
        assert_eq!(round_half_even_units(0.0000125, 5), 1);
        assert_eq!(round_half_even_units(0.5, 0), 0);
        assert_eq!(round_half_even_units(1.5, 0), 2);
        assert_eq!(round_half_even_units(0.0061234, 6), 6123);
    }

    #[test]
    fn spec_validation() {
        let mut s = ScanSpec::new(AtmosphereCondition::preset("day1").unwrap(), Scenario::LossOnly, 1);
        assert!(s.validate().is_ok());
        s.zenith_grid_deg.push(80.0);
        assert!(s.validate().is_err());
        let mut s = ScanSpec::new(AtmosphereCondition::preset("day1").unwrap(), Scenario::LossOnly, 1);
        s.samples_per_point = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn extinction_override_lookup() {
        let mut s = ScanSpec::new(AtmosphereCondition::preset("day1").unwrap(), Scenario::LossOnly, 1);
        s.extinction_overrides.push(ExtinctionOverride {
            zenith_deg: 30.0,
            extinction: 0.2,
        });
        assert_eq!(s.extinction_at(30.0), 0.2);
        assert_eq!(s.extinction_at(35.0), s.condition.extinction);
    }

    #[test]
    fn degenerate_pdr_has_one_value() {
        let mut s = ScanSpec::new(AtmosphereCondition::preset("day1").unwrap(), Scenario::LossOnly, 9);
        s.moments = MomentSource::Direct(DirectProvider {
            mean: [0.0, 0.0, 4.0, 4.0],
            cov: [[0.0; 4]; 4],
        });
        s.samples_per_point = 100;
        let r = pdr(&s, 20.0, 115.0, 1000, 6).unwrap();
        assert_eq!(r.rate_values.len(), 1);
        assert_eq!(r.probabilities, vec![1.0]);
        assert_eq!(r.batches, 10);
    }

    #[test]
    fn lossonly_dominates_noisy_pointwise() {
        let cond = AtmosphereCondition::preset("day1").unwrap();
        let mut loss = ScanSpec::new(cond, Scenario::LossOnly, 3);
        loss.zenith_grid_deg = vec![0.0, 40.0];
        loss.samples_per_point = 100;
        let mut noisy = loss.clone();
        noisy.scenario = Scenario::Noisy;
        let a = akr_scan(&loss).unwrap();
        let b = akr_scan(&noisy).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(p.fiber_km, q.fiber_km);
            assert!(p.akr >= q.akr, "{p:?} vs {q:?}");
        }
    }
}
