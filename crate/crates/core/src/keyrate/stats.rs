use serde::Serialize;

use super::ImperfectionParams;
use crate::error::{Error, Result};

/// Announcement and joint bit statistics for the two key announcements.
///
/// `joint[g][a][b]` is `p(a, b, gamma)` with `g = 0` for `+` and `g = 1` for `-`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnouncementStats {
    pub p_plus: f64,
    pub p_minus: f64,
    pub joint: [[[f64; 2]; 2]; 2],
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl AnnouncementStats {
    pub fn p_gamma(&self, g: usize) -> f64 {
        if g == 0 {
            self.p_plus
        } else {
            self.p_minus
        }
    }

    pub fn eps(&self, g: usize) -> f64 {
        if g == 0 {
            self.eps_plus
        } else {
            self.eps_minus
        }
    }

    /// `p(a, b | gamma)`; zero when the announcement never happens.
    pub fn conditional(&self, g: usize, a: usize, b: usize) -> f64 {
        let pg = self.p_gamma(g);
        if pg > 0.0 {
            self.joint[g][a][b] / pg
        } else {
            0.0
        }
    }

    /// `p(a | gamma)`.
    pub fn alice_marginal(&self, g: usize, a: usize) -> f64 {
        self.conditional(g, a, 0) + self.conditional(g, a, 1)
    }
}

/// Closed-form announcement statistics with mode mismatch and dark counts.
///
/// The per-state click probabilities are, with `x = exp(-sqrt(eta) mu (1 + sqrt(M) cos delta))`,
/// `y = exp(-sqrt(eta) mu (1 - sqrt(M) cos delta))` and `z = exp(-2 sqrt(eta) mu)`,
/// `(1 - p_d)((1 - x) y + p_d z)` for the matching announcement and
/// `(1 - p_d)((1 - y) x + p_d z)` for the other one.
pub fn announcement_stats(eta: f64, mu: f64, imp: &ImperfectionParams) -> Result<AnnouncementStats> {
    if !(eta >= 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("transmittance {eta} outside [0, 1]")));
    }
    if !(mu > 0.0) {
        return Err(Error::domain(format!("intensity mu must be positive, got {mu}")));
    }
    imp.validate()?;
    let sq = eta.sqrt();
    let c = imp.mode_match.sqrt() * imp.phase_mismatch_rad.cos();
    let pd = imp.dark_count;
    let keep = 1.0 - pd;
    let x = (-sq * mu * (1.0 + c)).exp();
    let y = (-sq * mu * (1.0 - c)).exp();
    let z = (-2.0 * sq * mu).exp();

    let right = keep * (-(-sq * mu * (1.0 + c)).exp_m1() * y + pd * z) / 4.0;
    let wrong = keep * (-(-sq * mu * (1.0 - c)).exp_m1() * x + pd * z) / 4.0;
    // Same expression for both announcements so the symmetry is exact.
    let p_gamma = 2.0 * (right + wrong);

    let denom = x + y - 2.0 * keep * x * y;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "error rate undefined: x + y - 2(1 - p_d)xy = {denom:e} (eta {eta}, mu {mu})"
        )));
    }
    let eps = (x - keep * x * y) / denom;

    Ok(AnnouncementStats {
        p_plus: p_gamma,
        p_minus: p_gamma,
        joint: [
            [[right, wrong], [wrong, right]],
            [[wrong, right], [right, wrong]],
        ],
        eps_plus: eps,
        eps_minus: eps,
        x,
        y,
        z,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ideal_limit() {
        let (eta, mu) = (0.04, 0.3);
        let s = announcement_stats(eta, mu, &ImperfectionParams::ideal()).unwrap();
        let want = (1.0 - (-2.0 * eta.sqrt() * mu).exp()) / 2.0;
        assert!((s.p_plus - want).abs() < 1e-15);
        assert_eq!(s.p_plus, s.p_minus);
        assert!(s.eps_plus.abs() < 1e-15);
        assert_eq!(s.eps_plus, s.eps_minus);
    }

    #[test]
    fn zero_transmittance_is_degenerate() {
        let imp = ImperfectionParams {
            dark_count: 0.0,
            ..ImperfectionParams::ideal()
        };
        // x = y = 1 with p_d = 0 makes the error-rate denominator vanish
        assert!(announcement_stats(0.0, 0.3, &imp).is_err());
    }

    proptest! {
        #[test]
        fn conditionals_normalize(
            eta in 1e-4f64..1.0,
            mu in 1e-3f64..2.0,
            m in 0.0f64..=1.0,
            delta in -1.5f64..1.5,
            pd in 0.0f64..0.1,
        ) {
            let imp = ImperfectionParams {
                mode_match: m,
                phase_mismatch_rad: delta,
                dark_count: pd,
                detector_eff: 1.0,
                ec_inefficiency: 1.0,
            };
            let s = announcement_stats(eta, mu, &imp).unwrap();
            for g in 0..2 {
                let total: f64 = (0..2).flat_map(|a| (0..2).map(move |b| (a, b)))
                    .map(|(a, b)| s.conditional(g, a, b)).sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
            prop_assert!((0.0..=1.0).contains(&s.p_plus));
            prop_assert!((0.0..=0.5 + 1e-12).contains(&s.eps_plus));
        }
    }
}
