//! Mean down-link transmittance at zenith as a function of the initial beam width.

use pmqkd::beam::AtmosphereCondition;
use pmqkd::scan::{transmittance_vs_beamwidth, ScanSpec, Scenario};

fn main() -> pmqkd::Result<()> {
    let conditions = AtmosphereCondition::presets();
    let mut spec = ScanSpec::new(conditions[0].clone(), Scenario::LossOnly, 1);
    spec.samples_per_point = 500;
    let w0: Vec<f64> = (1..=7).map(|i| i as f64 / 20.0).collect();
    let rows = transmittance_vs_beamwidth(&spec, &conditions, &w0)?;

    print!("{:>6}", "w0 m");
    for c in &conditions {
        print!(" {:>8}", c.label);
    }
    println!();
    for (i, w) in w0.iter().enumerate() {
        print!("{w:>6.2}");
        for row in rows.iter().skip(i).step_by(w0.len()).take(conditions.len()) {
            print!(" {:>8.4}", row.mean_transmittance);
        }
        println!();
    }
    Ok(())
}
