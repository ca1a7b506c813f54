//! Command runners behind the `pmqkd` binary: each one computes, writes its
//! CSV or JSON artifacts and reports one summary line per file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::beam::BeamParams;
use crate::config::{PointSettings, RunConfig};
use crate::error::{Error, Result};
use crate::geometry::FiberLink;
use crate::keyrate::{
    lossonly_keyrate, lossonly_povm, mismatch_povm, model_povm, noisy_keyrate,
    noisy_keyrate_detailed, plob_bound, total_transmittance, NoisyRate, PovmDump,
};
use crate::optimizer::optimize_intensity;
use crate::scan::{akr_scan_detailed, pdr, transmittance_vs_beamwidth, AkrPoint, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    AkrScan,
    Pdr,
    BeamwidthScan,
    RatePoint,
    OptimizeMu,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::AkrScan => "akr-scan",
            Command::Pdr => "pdr",
            Command::BeamwidthScan => "beamwidth-scan",
            Command::RatePoint => "rate-point",
            Command::OptimizeMu => "optimize-mu",
        }
    }
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Command::AkrScan,
            Command::Pdr,
            Command::BeamwidthScan,
            Command::RatePoint,
            Command::OptimizeMu,
        ]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown subcommand '{s}'")))
    }
}

/// Command-line overrides on top of the configuration.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    pub dump_povm: bool,
}

/// Artifacts written by one command, with their one-line summaries.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub lines: Vec<String>,
}

impl RunReport {
    fn add(&mut self, path: PathBuf, line: String) {
        self.lines.push(format!("{}: {line}", path.display()));
        self.files.push(path);
    }
}

/// Fixed 12-significant-digit formatting used in every CSV.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.11e}")
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Runs `command` on a thread pool of the requested size.
pub fn run_subcommand(command: Command, config: &RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let workers = opts.workers.or(config.workers).unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    let out_dir = opts.out_dir.clone().unwrap_or_else(|| config.out_dir.clone());
    fs::create_dir_all(&out_dir)?;
    pool.install(|| match command {
        Command::AkrScan => run_akr_scan(config, &out_dir, opts),
        Command::Pdr => run_pdr(config, &out_dir),
        Command::BeamwidthScan => run_beamwidth(config, &out_dir),
        Command::RatePoint => run_rate_point(config, &out_dir, opts),
        Command::OptimizeMu => run_optimize_mu(config, &out_dir, opts),
    })
}

fn run_akr_scan(config: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    let spec = &config.scan;
    let runs = akr_scan_detailed(spec)?;
    let mut report = RunReport::default();
    let stem = format!("akr_{}_{}", spec.condition.label, spec.scenario.label());
    let path = out_dir.join(format!("{stem}.csv"));
    write_csv(
        &path,
        &["zenith_deg", "slant_km", "fiber_km", "mu_star", "akr"],
        runs.iter().map(|r| {
            let p = &r.point;
            [p.zenith_deg, p.slant_km, p.fiber_km, p.mu_star, p.akr]
                .map(fmt_num)
                .to_vec()
        }),
    )?;
    let first = &runs[0].point;
    report.add(
        path,
        format!(
            "{} zenith points, {} {}, AKR at {} deg = {:.6e}",
            runs.len(),
            spec.condition.label,
            spec.scenario.label(),
            first.zenith_deg,
            first.akr
        ),
    );

    if config.samples_csv {
        for r in &runs {
            let path = out_dir.join(format!("samples_{}_z{}.csv", spec.condition.label, r.point.zenith_deg));
            write_samples(&path, &r.samples, &r.etas)?;
            report.add(path, format!("{} beam samples", r.samples.len()));
        }
    }
    if opts.dump_povm {
        let eta_t = FiberLink::new(first.fiber_km, spec.attenuation_db_per_km)?.transmittance();
        let eta_s = runs[0].pdt.mean();
        let eta = total_transmittance(eta_s, eta_t, spec.detector_eff());
        let path = out_dir.join(format!("{stem}_povm.json"));
        write_json(&path, &povm_dump(eta, first.mu_star, config, spec.scenario)?)?;
        report.add(path, format!("POVM at eta = {eta:.6e}, mu = {:.6e}", first.mu_star));
    }
    Ok(report)
}

fn write_samples(path: &Path, samples: &[BeamParams], etas: &[f64]) -> Result<()> {
    write_csv(
        path,
        &["sample_index", "x0", "y0", "w1", "w2", "orient", "eta"],
        samples.iter().zip(etas).enumerate().map(|(i, (v, eta))| {
            let mut row = vec![i.to_string()];
            row.extend([v.x0_m(), v.y0_m(), v.w1_m(), v.w2_m(), v.orient_rad(), *eta].map(fmt_num));
            row
        }),
    )
}

fn run_pdr(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let s = &config.pdr;
    let spec = &config.scan;
    let result = pdr(spec, s.zenith_deg, s.fiber_km, s.n_samples, s.round_digits)?;
    let path = out_dir.join(format!("pdr_{}_{}.csv", spec.condition.label, spec.scenario.label()));
    write_csv(
        &path,
        &["rate_value", "probability"],
        result
            .rate_values
            .iter()
            .zip(&result.probabilities)
            .map(|(v, p)| vec![fmt_num(*v), fmt_num(*p)]),
    )?;
    let mut report = RunReport::default();
    report.add(
        path,
        format!(
            "{} batches, {} distinct values, spread {:.6e}, peak probability {:.3}",
            result.batches,
            result.rate_values.len(),
            result.spread(),
            result.peak_probability()
        ),
    );
    Ok(report)
}

fn run_beamwidth(config: &RunConfig, out_dir: &Path) -> Result<RunReport> {
    let b = &config.beamwidth;
    let mut spec = config.scan.clone();
    spec.samples_per_point = b.samples;
    spec.zenith_grid_deg = vec![0.0];
    let rows = transmittance_vs_beamwidth(&spec, &b.conditions, &b.w0_grid)?;
    let path = out_dir.join("beamwidth.csv");
    write_csv(
        &path,
        &["w0_m", "condition", "mean_transmittance"],
        rows.iter()
            .map(|r| vec![fmt_num(r.w0_m), r.condition.clone(), fmt_num(r.mean_transmittance)]),
    )?;
    let mut report = RunReport::default();
    report.add(
        path,
        format!("{} conditions x {} beam widths", b.conditions.len(), b.w0_grid.len()),
    );
    Ok(report)
}

fn rate_at(config: &RunConfig, scenario: Scenario, eta: f64, mu: f64) -> Result<f64> {
    match scenario {
        Scenario::LossOnly => Ok(lossonly_keyrate(eta, mu)),
        Scenario::Noisy => noisy_keyrate(eta, mu, &config.scan.imperfections),
    }
}

#[derive(Serialize)]
struct RatePointOut {
    eta: f64,
    mu: f64,
    scenario: &'static str,
    rate: f64,
    plob_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<NoisyRate>,
}

fn run_rate_point(config: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    let PointSettings { eta, mu, scenario } = config.rate_point;
    let detail = match scenario {
        Scenario::Noisy if eta > 0.0 => Some(noisy_keyrate_detailed(eta, mu, &config.scan.imperfections)?),
        _ => None,
    };
    let out = RatePointOut {
        eta,
        mu,
        scenario: scenario.label(),
        rate: rate_at(config, scenario, eta, mu)?,
        plob_bound: plob_bound(eta).ok(),
        detail,
    };
    let path = out_dir.join("rate_point.json");
    write_json(&path, &out)?;
    let mut report = RunReport::default();
    report.add(
        path,
        format!("{} rate at eta = {eta}, mu = {mu}: {:.12e}", scenario.label(), out.rate),
    );
    if opts.dump_povm {
        dump_point(config, scenario, eta, mu, out_dir, &mut report)?;
    }
    Ok(report)
}

#[derive(Serialize)]
struct OptimumOut {
    eta: f64,
    scenario: &'static str,
    mu_star: f64,
    rate_star: f64,
}

fn run_optimize_mu(config: &RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<RunReport> {
    let PointSettings { eta, scenario, .. } = config.optimize_mu;
    let opt = optimize_intensity(|mu| rate_at(config, scenario, eta, mu), &config.scan.optimizer)?;
    let path = out_dir.join("optimize_mu.json");
    write_json(
        &path,
        &OptimumOut {
            eta,
            scenario: scenario.label(),
            mu_star: opt.mu_star,
            rate_star: opt.rate_star,
        },
    )?;
    let mut report = RunReport::default();
    report.add(
        path,
        format!(
            "{} at eta = {eta}: mu* = {:.12e}, R* = {:.12e}",
            scenario.label(),
            opt.mu_star,
            opt.rate_star
        ),
    );
    if opts.dump_povm {
        dump_point(config, scenario, eta, opt.mu_star, out_dir, &mut report)?;
    }
    Ok(report)
}

fn dump_point(
    config: &RunConfig,
    scenario: Scenario,
    eta: f64,
    mu: f64,
    out_dir: &Path,
    report: &mut RunReport,
) -> Result<()> {
    let path = out_dir.join("povm_dump.json");
    write_json(&path, &povm_dump(eta, mu, config, scenario)?)?;
    report.add(path, format!("POVM at eta = {eta}, mu = {mu}"));
    Ok(())
}

#[derive(Serialize)]
struct PovmReport {
    eta: f64,
    mu: f64,
    lossonly: PovmDump,
    #[serde(skip_serializing_if = "Option::is_none")]
    mismatch: Option<PovmDump>,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<PovmDump>,
}

fn povm_dump(eta: f64, mu: f64, config: &RunConfig, scenario: Scenario) -> Result<PovmReport> {
    let lossonly = lossonly_povm(eta, mu)?.dump()?;
    let (mismatch, model) = match scenario {
        Scenario::LossOnly => (None, None),
        Scenario::Noisy => {
            let imp = &config.scan.imperfections;
            let mm = mismatch_povm(eta, mu, imp.mode_match, imp.phase_mismatch_rad)?;
            let model = model_povm(&mm, imp.dark_count)?;
            (Some(mm.dump()?), Some(model.dump()?))
        }
    };
    Ok(PovmReport {
        eta,
        mu,
        lossonly,
        mismatch,
        model,
    })
}

/// Points of an AKR CSV read back, mainly for tests and examples.
pub fn read_akr_csv(path: &Path) -> Result<Vec<AkrPoint>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let f = |i: usize| -> Result<f64> {
                rec.get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::Numerical(format!("bad AKR CSV field {i} in {rec:?}")))
            };
            Ok(AkrPoint {
                zenith_deg: f(0)?,
                slant_km: f(1)?,
                fiber_km: f(2)?,
                mu_star: f(3)?,
                akr: f(4)?,
            })
        })
        .collect()
}
