//! Optimal signal intensity and rate versus total transmittance.

use pmqkd::keyrate::{lossonly_keyrate, noisy_keyrate, plob_bound, ImperfectionParams};
use pmqkd::optimizer::{optimize_intensity, OptimizationSpec};

fn main() -> pmqkd::Result<()> {
    let spec = OptimizationSpec::default();
    let imp = ImperfectionParams::calibrated();
    println!("{:>8} {:>9} {:>11} {:>9} {:>11} {:>11}", "eta", "mu loss", "R loss", "mu noisy", "R noisy", "PLOB");
    for k in 1..=7 {
        let eta = 10f64.powi(-k);
        let loss = optimize_intensity(|mu| Ok(lossonly_keyrate(eta, mu)), &spec)?;
        let noisy = optimize_intensity(|mu| noisy_keyrate(eta, mu, &imp), &spec)?;
        println!(
            "{eta:>8.0e} {:>9.4} {:>11.3e} {:>9.4} {:>11.3e} {:>11.3e}",
            loss.mu_star,
            loss.rate_star,
            noisy.mu_star,
            noisy.rate_star,
            plob_bound(eta)?
        );
    }
    Ok(())
}
