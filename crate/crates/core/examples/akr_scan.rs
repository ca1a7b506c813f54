//! Average key rate versus zenith angle for one weather condition, both
//! scenarios, with the fiber arm matched to the mean satellite transmittance.
//!
//! cargo run --release --example akr_scan -- night2

use pmqkd::beam::AtmosphereCondition;
use pmqkd::scan::{akr_scan, ScanSpec, Scenario};

fn main() -> pmqkd::Result<()> {
    let label = std::env::args().nth(1).unwrap_or_else(|| "day1".into());
    let cond = AtmosphereCondition::preset(&label)
        .ok_or_else(|| pmqkd::Error::Config(format!("unknown condition {label}")))?;

    let loss = akr_scan(&ScanSpec::new(cond.clone(), Scenario::LossOnly, 2024))?;
    let noisy = akr_scan(&ScanSpec::new(cond, Scenario::Noisy, 2024))?;

    println!("{label}");
    println!("{:>6} {:>9} {:>9} {:>11} {:>11} {:>6}", "zenith", "slant km", "fiber km", "loss-only", "noisy", "ratio");
    for (l, n) in loss.iter().zip(&noisy) {
        println!(
            "{:>6.0} {:>9.1} {:>9.1} {:>11.3e} {:>11.3e} {:>6.2}",
            l.zenith_deg,
            l.slant_km,
            l.fiber_km,
            l.akr,
            n.akr,
            l.akr / n.akr
        );
    }
    Ok(())
}
