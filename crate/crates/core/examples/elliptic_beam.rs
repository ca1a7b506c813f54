//! Sampling elliptic beams at the ground station and the resulting PDT.

use pmqkd::beam::{
    pdt_histogram, AtmosphereCondition, BeamStatisticsProvider, Direction, DownlinkProvider,
};
use pmqkd::geometry::SatelliteGeometry;
use pmqkd::scan::{ScanSpec, Scenario};

fn main() -> pmqkd::Result<()> {
    let cond = AtmosphereCondition::preset("night3").unwrap();
    let geom = SatelliteGeometry::from_degrees(500.0, 40.0, 20.0)?;
    let provider = DownlinkProvider::new(Default::default())?;
    let stats = provider.statistics(&cond, &geom, 0.15, 1.55e-6, Direction::Downlink)?;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
    println!("mean (x0, y0, theta1, theta2) = ({})", fmt(stats.mean()));
    println!("cov diagonal = ({})", fmt(&(0..4).map(|i| stats.cov()[i][i]).collect::<Vec<_>>()));

    let mut spec = ScanSpec::new(cond, Scenario::LossOnly, 9);
    spec.zenith_grid_deg = vec![40.0];
    let (samples, etas) = spec.sample_channel(40.0, 0, 5000)?;
    for (v, eta) in samples.iter().zip(&etas).take(5) {
        println!(
            "x0 {:+.3e} y0 {:+.3e} W1 {:.4} W2 {:.4} phi {:.3} -> eta {:.4}",
            v.x0_m(),
            v.y0_m(),
            v.w1_m(),
            v.w2_m(),
            v.orient_rad(),
            eta
        );
    }

    let pdt = pdt_histogram(&etas, 400)?;
    println!("PDT mean {:.4}  median {:.4}  mode {:.4}", pdt.mean(), pdt.median(), pdt.mode());
    let peak = pdt.probabilities().iter().copied().fold(0.0, f64::max);
    for (i, p) in pdt.probabilities().iter().enumerate() {
        if *p > 0.0 {
            println!("{:.4} {}", pdt.center(i), "#".repeat((60.0 * p / peak).round() as usize));
        }
    }
    Ok(())
}
