//! Distribution of batch average key rates at 20 degrees with a 115 km fiber arm.

use pmqkd::beam::AtmosphereCondition;
use pmqkd::scan::{pdr, ScanSpec, Scenario};

fn main() -> pmqkd::Result<()> {
    let cond = AtmosphereCondition::preset("day1").unwrap();
    for scenario in [Scenario::LossOnly, Scenario::Noisy] {
        let spec = ScanSpec::new(cond.clone(), scenario, 2024);
        let result = pdr(&spec, 20.0, 115.0, 50_000, scenario.default_round_digits())?;
        println!(
            "{}: {} batches, spread {:.2e}",
            scenario.label(),
            result.batches,
            result.spread()
        );
        for (v, p) in result.rate_values.iter().zip(&result.probabilities) {
            println!("  {v:.7}  {}", "#".repeat((p * 100.0).round() as usize));
        }
    }
    Ok(())
}
