//! TOML run configuration.
//!
//! Only `seed` and `scan.condition` are required; everything else has a
//! default. A minimal document:
//!
//! ```toml
//! seed = 7
//!
//! [scan]
//! condition = "day1"
//! ```
//!
//! Sections: `[link]`, `[scan]` (with `[[scan.extinction_override]]`),
//! `[optimizer]`, `[quadrature]`, `[imperfections]`, `[provider]`,
//! `[moments]`, `[conditions.<name>]`, `[pdr]`, `[beamwidth]`, `[rate_point]`,
//! `[optimize_mu]`. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::PathBuf;

use serde::Deserialize;
use toml::Spanned;

use crate::beam::{AtmosphereCondition, DirectProvider, Direction, DownlinkConstants};
use crate::error::{Error, Result};
use crate::scan::{default_zenith_grid, ExtinctionOverride, Matching, MomentSource, ScanSpec, Scenario};

const REQUIRED_KEYS: [&[&str]; 2] = [&["seed"], &["scan", "condition"]];

macro_rules! bounded {
    ($name:ident, $ty:ty, $desc:literal, |$v:ident| $ok:expr) => {
        #[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
        #[serde(try_from = "f64")]
        struct $name($ty);

        impl TryFrom<f64> for $name {
            type Error = String;
            fn try_from($v: f64) -> std::result::Result<Self, String> {
                if $ok {
                    Ok($name($v as $ty))
                } else {
                    Err(format!("{} must be {}, got {}", stringify!($name), $desc, $v))
                }
            }
        }
    };
}

bounded!(Positive, f64, "positive and finite", |v| v > 0.0 && v.is_finite());
bounded!(NonNegative, f64, ">= 0", |v| v >= 0.0 && v.is_finite());
bounded!(UnitInterval, f64, "in [0, 1]", |v| (0.0..=1.0).contains(&v));
bounded!(Fraction, f64, "in (0, 1]", |v| v > 0.0 && v <= 1.0);
bounded!(DarkCount, f64, "in [0, 1)", |v| (0.0..1.0).contains(&v));
bounded!(Inefficiency, f64, ">= 1", |v| v >= 1.0 && v.is_finite());
bounded!(Zenith, f64, "a zenith angle in [0, 75] degrees", |v| (0.0..=75.0).contains(&v));
bounded!(Finite, f64, "finite", |v| v.is_finite());

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "i64")]
struct Count(usize);

impl TryFrom<i64> for Count {
    type Error = String;
    fn try_from(v: i64) -> std::result::Result<Self, String> {
        if v >= 1 {
            Ok(Count(v as usize))
        } else {
            Err(format!("count must be >= 1, got {v}"))
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: u64,
    workers: Option<Count>,
    out_dir: Option<PathBuf>,
    #[serde(default)]
    link: RawLink,
    scan: RawScan,
    optimizer: Option<Spanned<RawOptimizer>>,
    quadrature: Option<RawQuadrature>,
    imperfections: Option<RawImperfections>,
    provider: Option<RawProvider>,
    moments: Option<Spanned<RawMoments>>,
    #[serde(default)]
    conditions: BTreeMap<String, RawCondition>,
    #[serde(default)]
    pdr: RawPdr,
    #[serde(default)]
    beamwidth: RawBeamwidth,
    #[serde(default)]
    rate_point: RawPoint,
    #[serde(default)]
    optimize_mu: RawPoint,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    satellite_altitude_km: Option<Positive>,
    atmosphere_thickness_km: Option<Positive>,
    aperture_radius_m: Option<Positive>,
    w0_m: Option<Positive>,
    wavelength_m: Option<Positive>,
    attenuation_db_per_km: Option<Positive>,
    direction: Option<Direction>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    condition: Spanned<String>,
    scenario: Option<Scenario>,
    zenith_deg: Option<Vec<Zenith>>,
    samples_per_point: Option<Count>,
    n_bins: Option<Count>,
    matching: Option<Matching>,
    #[serde(default)]
    samples_csv: bool,
    #[serde(default)]
    extinction_override: Vec<RawOverride>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverride {
    zenith_deg: Zenith,
    extinction: Fraction,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOptimizer {
    mu_min: Option<Positive>,
    mu_max: Option<Positive>,
    coarse_points: Option<Count>,
    tolerance: Option<Positive>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuadrature {
    nodes: Option<Count>,
    tolerance: Option<Positive>,
    max_panels: Option<Count>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImperfections {
    mode_match: Option<UnitInterval>,
    phase_mismatch_rad: Option<Finite>,
    dark_count: Option<DarkCount>,
    detector_eff: Option<Fraction>,
    ec_inefficiency: Option<Inefficiency>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProvider {
    pointing_error_rad: Option<NonNegative>,
    wander_coefficient: Option<NonNegative>,
    turbulence_broadening: Option<NonNegative>,
    scatter_cross_section_m2: Option<NonNegative>,
    scatter_angle_rad: Option<NonNegative>,
    log_width_turbulence_gain: Option<NonNegative>,
    log_width_scatter_gain: Option<NonNegative>,
    log_width_correlation: Option<Finite>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMoments {
    mean: [Finite; 4],
    cov: [[Finite; 4]; 4],
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCondition {
    n0_per_m3: Option<NonNegative>,
    cn2_m_neg23: Option<Positive>,
    extinction: Option<Fraction>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPdr {
    zenith_deg: Option<Zenith>,
    fiber_km: Option<NonNegative>,
    n_samples: Option<Count>,
    round_digits: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBeamwidth {
    w0_m: Option<Vec<Positive>>,
    conditions: Option<Vec<Spanned<String>>>,
    samples: Option<Count>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoint {
    eta: Option<UnitInterval>,
    mu: Option<Positive>,
    scenario: Option<Scenario>,
}

/// Settings of the `pdr` command.
#[derive(Debug, Clone, PartialEq)]
pub struct PdrSettings {
    pub zenith_deg: f64,
    pub fiber_km: f64,
    pub n_samples: usize,
    pub round_digits: u32,
}

/// Settings of the `beamwidth-scan` command.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamwidthSettings {
    pub w0_grid: Vec<f64>,
    pub conditions: Vec<AtmosphereCondition>,
    pub samples: usize,
}

/// Settings of the single-point commands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSettings {
    pub eta: f64,
    pub mu: f64,
    pub scenario: Scenario,
}

/// Validated configuration for every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub workers: Option<usize>,
    pub out_dir: PathBuf,
    pub conditions: BTreeMap<String, AtmosphereCondition>,
    pub scan: ScanSpec,
    pub samples_csv: bool,
    pub pdr: PdrSettings,
    pub beamwidth: BeamwidthSettings,
    pub rate_point: PointSettings,
    pub optimize_mu: PointSettings,
}

impl RunConfig {
    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.scan.seed = seed;
        self
    }
}

fn line_of(text: &str, span: Range<usize>) -> usize {
    text[..span.start.min(text.len())].matches('\n').count() + 1
}

fn missing_keys(table: &toml::Table) -> Vec<String> {
    REQUIRED_KEYS
        .iter()
        .filter(|path| {
            let mut node: Option<&toml::Value> = None;
            let mut cur = table;
            for (i, key) in path.iter().enumerate() {
                match cur.get(*key) {
                    Some(v) if i + 1 == path.len() => node = Some(v),
                    Some(toml::Value::Table(t)) => cur = t,
                    _ => return true,
                }
            }
            node.is_none()
        })
        .map(|path| path.join("."))
        .collect()
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    let missing = missing_keys(&table);
    if !missing.is_empty() {
        return Err(Error::Config(format!(
            "missing required keys: {}",
            missing.join(", ")
        )));
    }
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    resolve(raw, text)
}

fn resolve(raw: RawConfig, text: &str) -> Result<RunConfig> {
    let mut conditions: BTreeMap<String, AtmosphereCondition> = AtmosphereCondition::presets()
        .into_iter()
        .map(|c| (c.label.clone(), c))
        .collect();
    for (name, c) in &raw.conditions {
        let merged = match conditions.get(name) {
            Some(base) => AtmosphereCondition {
                label: name.clone(),
                n0_per_m3: c.n0_per_m3.map_or(base.n0_per_m3, |v| v.0),
                cn2_m_neg23: c.cn2_m_neg23.map_or(base.cn2_m_neg23, |v| v.0),
                extinction: c.extinction.map_or(base.extinction, |v| v.0),
            },
            None => {
                let (Some(n0), Some(cn2)) = (c.n0_per_m3, c.cn2_m_neg23) else {
                    return Err(Error::Config(format!(
                        "condition '{name}' is not a preset, so it needs n0_per_m3 and cn2_m_neg23"
                    )));
                };
                AtmosphereCondition {
                    label: name.clone(),
                    n0_per_m3: n0.0,
                    cn2_m_neg23: cn2.0,
                    extinction: c.extinction.map_or(crate::beam::DEFAULT_EXTINCTION, |v| v.0),
                }
            }
        };
        merged.validate()?;
        conditions.insert(name.clone(), merged);
    }
    let lookup = |name: &Spanned<String>| -> Result<AtmosphereCondition> {
        conditions.get(name.get_ref()).cloned().ok_or_else(|| {
            Error::Config(format!(
                "line {}: unknown condition '{}' (known: {})",
                line_of(text, name.span()),
                name.get_ref(),
                conditions.keys().cloned().collect::<Vec<_>>().join(", ")
            ))
        })
    };

    let scenario = raw.scan.scenario.unwrap_or(Scenario::LossOnly);
    let mut scan = ScanSpec::new(lookup(&raw.scan.condition)?, scenario, raw.seed);
    let link = &raw.link;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v.0;
            }
        };
    }
    set!(scan.satellite_altitude_km, link.satellite_altitude_km);
    set!(scan.atmosphere_thickness_km, link.atmosphere_thickness_km);
    set!(scan.aperture_radius_m, link.aperture_radius_m);
    set!(scan.w0_m, link.w0_m);
    set!(scan.wavelength_m, link.wavelength_m);
    set!(scan.attenuation_db_per_km, link.attenuation_db_per_km);
    if let Some(d) = link.direction {
        scan.direction = d;
    }
    if scan.satellite_altitude_km <= scan.atmosphere_thickness_km {
        return Err(Error::Config(format!(
            "link: satellite altitude {} km must exceed atmosphere thickness {} km",
            scan.satellite_altitude_km, scan.atmosphere_thickness_km
        )));
    }

    scan.zenith_grid_deg = raw
        .scan
        .zenith_deg
        .as_ref()
        .map(|z| z.iter().map(|v| v.0).collect())
        .unwrap_or_else(default_zenith_grid);
    if scan.zenith_grid_deg.is_empty() {
        return Err(Error::Config("scan.zenith_deg must not be empty".into()));
    }
    set!(scan.samples_per_point, raw.scan.samples_per_point);
    set!(scan.n_bins, raw.scan.n_bins);
    if let Some(m) = raw.scan.matching {
        scan.matching = m;
    }
    scan.extinction_overrides = raw
        .scan
        .extinction_override
        .iter()
        .map(|o| ExtinctionOverride {
            zenith_deg: o.zenith_deg.0,
            extinction: o.extinction.0,
        })
        .collect();

    if let Some(opt) = &raw.optimizer {
        let o = opt.get_ref();
        set!(scan.optimizer.mu_min, o.mu_min);
        set!(scan.optimizer.mu_max, o.mu_max);
        set!(scan.optimizer.coarse_points, o.coarse_points);
        set!(scan.optimizer.tolerance, o.tolerance);
        scan.optimizer.validate().map_err(|e| {
            Error::Config(format!("line {}: [optimizer] {e}", line_of(text, opt.span())))
        })?;
    }
    if let Some(q) = &raw.quadrature {
        set!(scan.quadrature.nodes, q.nodes);
        set!(scan.quadrature.tolerance, q.tolerance);
        set!(scan.quadrature.max_panels, q.max_panels);
    }
    if let Some(i) = &raw.imperfections {
        let imp = &mut scan.imperfections;
        set!(imp.mode_match, i.mode_match);
        set!(imp.phase_mismatch_rad, i.phase_mismatch_rad);
        set!(imp.dark_count, i.dark_count);
        set!(imp.detector_eff, i.detector_eff);
        set!(imp.ec_inefficiency, i.ec_inefficiency);
    }

    let mut constants = DownlinkConstants::default();
    if let Some(p) = &raw.provider {
        set!(constants.pointing_error_rad, p.pointing_error_rad);
        set!(constants.wander_coefficient, p.wander_coefficient);
        set!(constants.turbulence_broadening, p.turbulence_broadening);
        set!(constants.scatter_cross_section_m2, p.scatter_cross_section_m2);
        set!(constants.scatter_angle_rad, p.scatter_angle_rad);
        set!(constants.log_width_turbulence_gain, p.log_width_turbulence_gain);
        set!(constants.log_width_scatter_gain, p.log_width_scatter_gain);
        set!(constants.log_width_correlation, p.log_width_correlation);
        constants.validate()?;
    }
    scan.moments = match &raw.moments {
        Some(m) => {
            let direct = DirectProvider {
                mean: m.get_ref().mean.map(|v| v.0),
                cov: m.get_ref().cov.map(|row| row.map(|v| v.0)),
            };
            crate::beam::BeamStatistics::new(direct.mean, direct.cov, scan.w0_m).map_err(|e| {
                Error::Config(format!("line {}: [moments] {e}", line_of(text, m.span())))
            })?;
            MomentSource::Direct(direct)
        }
        None => MomentSource::Downlink(constants),
    };
    scan.validate()?;

    let pdr = PdrSettings {
        zenith_deg: raw.pdr.zenith_deg.map_or(20.0, |v| v.0),
        fiber_km: raw.pdr.fiber_km.map_or(115.0, |v| v.0),
        n_samples: raw.pdr.n_samples.map_or(100_000, |v| v.0),
        round_digits: raw
            .pdr
            .round_digits
            .unwrap_or_else(|| scenario.default_round_digits()),
    };
    if pdr.round_digits > 15 {
        return Err(Error::Config(format!(
            "pdr.round_digits must be <= 15, got {}",
            pdr.round_digits
        )));
    }

    let beamwidth = BeamwidthSettings {
        w0_grid: raw
            .beamwidth
            .w0_m
            .as_ref()
            .map(|w| w.iter().map(|v| v.0).collect())
            .unwrap_or_else(|| (1..=7).map(|i| i as f64 / 20.0).collect()),
        conditions: match &raw.beamwidth.conditions {
            Some(names) => names.iter().map(&lookup).collect::<Result<_>>()?,
            None => AtmosphereCondition::PRESETS
                .iter()
                .map(|(l, _, _)| conditions[*l].clone())
                .collect(),
        },
        samples: raw.beamwidth.samples.map_or(scan.samples_per_point, |v| v.0),
    };
    if let Some(w) = beamwidth.w0_grid.iter().find(|w| **w > 0.35) {
        return Err(Error::Config(format!(
            "beamwidth.w0_m value {w} outside (0, 0.35]"
        )));
    }

    let point = |p: &RawPoint| PointSettings {
        eta: p.eta.map_or(0.01, |v| v.0),
        mu: p.mu.map_or(0.05, |v| v.0),
        scenario: p.scenario.unwrap_or(scenario),
    };

    Ok(RunConfig {
        seed: raw.seed,
        workers: raw.workers.map(|w| w.0),
        out_dir: raw.out_dir.unwrap_or_else(|| PathBuf::from("out")),
        conditions,
        samples_csv: raw.scan.samples_csv,
        scan,
        pdr,
        beamwidth,
        rate_point: point(&raw.rate_point),
        optimize_mu: point(&raw.optimize_mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::ImperfectionParams;

    const MINIMAL: &str = "seed = 7\n[scan]\ncondition = \"day1\"\n";

    #[test]
    fn minimal_config() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.scan.condition.n0_per_m3, 0.01);
        assert_eq!(c.scan.condition.cn2_m_neg23, 1.64e-16);
        assert_eq!(c.scan.scenario, Scenario::LossOnly);
        assert_eq!(c.scan.zenith_grid_deg.len(), 16);
        assert_eq!(c.pdr.round_digits, 6);
        assert_eq!(c.scan.imperfections, ImperfectionParams::calibrated());
    }

    #[test]
    fn empty_document_lists_required_keys() {
        let err = parse_config("").unwrap_err().to_string();
        assert!(err.contains("seed") && err.contains("scan.condition"), "{err}");
    }

    #[test]
    fn extinction_override_passes_through() {
        let text = format!(
            "{MINIMAL}[[scan.extinction_override]]\nzenith_deg = 30.0\nextinction = 0.25\n"
        );
        let c = parse_config(&text).unwrap();
        assert_eq!(c.scan.extinction_at(30.0), 0.25);
    }

    #[test]
    fn unknown_key_is_located() {
        let err = parse_config("seed = 7\n[scan]\ncondition = \"day1\"\nbogus = 1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4") && err.contains("bogus"), "{err}");
    }

    #[test]
    fn out_of_range_value_is_located() {
        let err = parse_config("seed = 7\n[scan]\ncondition = \"day1\"\n[imperfections]\ndark_count = 1.5\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 5"), "{err}");
    }

    #[test]
    fn unknown_preset_is_located() {
        let err = parse_config("seed = 7\n\n[scan]\ncondition = \"fog\"\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 4") && err.contains("fog"), "{err}");
    }

    #[test]
    fn user_condition_and_moments() {
        let text = "seed = 1\n[scan]\ncondition = \"haze\"\n[conditions.haze]\nn0_per_m3 = 1.0\n\
                    cn2_m_neg23 = 2e-16\nextinction = 0.4\n[moments]\nmean = [0.0, 0.0, 3.0, 3.0]\n\
                    cov = [[0.01, 0, 0, 0], [0, 0.01, 0, 0], [0, 0, 0.1, 0], [0, 0, 0, 0.1]]\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.scan.condition.extinction, 0.4);
        assert!(matches!(c.scan.moments, MomentSource::Direct(_)));
    }

    #[test]
    fn seed_override() {
        let c = parse_config(MINIMAL).unwrap().with_seed(99);
        assert_eq!((c.seed, c.scan.seed), (99, 99));
    }
}
