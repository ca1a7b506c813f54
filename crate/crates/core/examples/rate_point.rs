//! Key rate at a single transmittance, loss-only and with device imperfections.

use pmqkd::keyrate::{lossonly_keyrate, noisy_keyrate_detailed, plob_bound, ImperfectionParams};

fn main() -> pmqkd::Result<()> {
    let imp = ImperfectionParams::calibrated();
    let mu = 0.05;
    for eta in [1e-2, 1e-3, 1e-4] {
        let noisy = noisy_keyrate_detailed(eta, mu, &imp)?;
        println!(
            "eta {eta:.0e}: loss-only {:.4e}  noisy {:.4e}  PLOB {:.4e}",
            lossonly_keyrate(eta, mu),
            noisy.rate,
            plob_bound(eta)?
        );
        println!(
            "    p(+) {:.4e}  error rate {:.4e}  chi {:.4}  leakage {:.4}",
            noisy.plus.probability, noisy.plus.error_rate, noisy.plus.holevo, noisy.plus.leakage
        );
    }
    Ok(())
}
