//! Key-rate mathematics for phase-matching MDI-QKD.
//!
//! The loss-only rate has a closed form. The noisy rate goes through Eve's
//! effective POVM, her conditional states and the Holevo quantity, then the
//! Devetak-Winter bound per announcement.

mod holevo;
mod povm;
mod stats;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use holevo::{
    eve_conditional_state, holevo_information, noisy_keyrate, noisy_keyrate_detailed,
    von_neumann_entropy, AnnouncementRate, DensityMatrix4, NoisyRate,
};
pub use povm::{lossonly_povm, mismatch_povm, model_povm, Povm4, PovmDump};
pub use stats::{announcement_stats, AnnouncementStats};

/// Announcement outcomes of the middle node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Announcement {
    /// Only the first detector clicked.
    Plus,
    /// Only the second detector clicked.
    Minus,
    /// No click.
    Inconclusive,
    /// Both detectors clicked.
    Double,
}

impl Announcement {
    pub const ALL: [Announcement; 4] = [
        Announcement::Plus,
        Announcement::Minus,
        Announcement::Inconclusive,
        Announcement::Double,
    ];
    pub const KEY: [Announcement; 2] = [Announcement::Plus, Announcement::Minus];
}

/// `h(x) = -x log2 x - (1-x) log2 (1-x)`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    Ok(h2(x))
}

// Unchecked variant for arguments that are probabilities by construction.
pub(crate) fn h2(x: f64) -> f64 {
    let term = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    term(x) + term(1.0 - x)
}

/// Total transmittance `eta_s * eta_t * eta_d^2`.
pub fn total_transmittance(eta_s: f64, eta_t: f64, eta_d: f64) -> f64 {
    eta_s * eta_t * eta_d * eta_d
}

/// Closed-form loss-only key rate per pulse, clamped at zero.
pub fn lossonly_keyrate(eta: f64, mu: f64) -> f64 {
    if !(mu > 0.0) || !(eta > 0.0) {
        return 0.0;
    }
    let sq = eta.min(1.0).sqrt();
    let gain = -(-2.0 * mu * sq).exp_m1();
    let phase_error = 0.5 * (1.0 - (-4.0 * mu * (1.0 - sq) - 2.0 * mu * sq).exp());
    (gain * (1.0 - h2(phase_error.clamp(0.0, 1.0)))).max(0.0)
}

/// Repeaterless bound `-log2(1 - eta)`.
pub fn plob_bound(eta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::domain(format!(
            "PLOB bound needs 0 <= eta < 1, got {eta} (diverges at 1)"
        )));
    }
    Ok(-(-eta).ln_1p() / std::f64::consts::LN_2)
}

/// Error-correction leakage `f_EC * h(eps)`.
pub fn ec_leakage(eps: f64, f_ec: f64) -> f64 {
    f_ec * h2(eps.clamp(0.0, 1.0))
}

/// `max(1 - leakage - chi, 0)`.
pub fn devetak_winter_rate(delta_ec: f64, chi: f64) -> f64 {
    (1.0 - delta_ec - chi).max(0.0)
}

/// Coherent-state amplitude `mu` and the coefficients of `|+-sqrt(mu)>` in the
/// orthonormal even/odd basis `{e0, e1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalBasis {
    mu: f64,
    c0: f64,
    c1: f64,
}

impl SignalBasis {
    pub fn new(mu: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::domain(format!("intensity mu must be positive, got {mu}")));
        }
        let e = (-2.0 * mu).exp();
        let c0 = (0.5 * (1.0 + e)).sqrt();
        let c1 = (-0.5 * (-2.0 * mu).exp_m1()).sqrt();
        Ok(Self { mu, c0, c1 })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    /// Joint signal `|a>|b>` in the basis `(e00, e11, e01, e10)`; bit 0 is `+sqrt(mu)`.
    pub fn signal(&self, a: u8, b: u8) -> [crate::linalg::C64; 4] {
        let (c0, c1) = (self.c0, self.c1);
        let sa = if a == 0 { 1.0 } else { -1.0 };
        let sb = if b == 0 { 1.0 } else { -1.0 };
        [c0 * c0, sa * sb * c1 * c1, sb * c0 * c1, sa * c0 * c1].map(|v| crate::linalg::C64::new(v, 0.0))
    }
}

/// Device and post-processing imperfections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionParams {
    /// Mode overlap `M` between the two arriving pulses.
    pub mode_match: f64,
    /// Residual phase mismatch `delta` in radians.
    pub phase_mismatch_rad: f64,
    pub dark_count: f64,
    pub detector_eff: f64,
    pub ec_inefficiency: f64,
}

impl ImperfectionParams {
    pub fn ideal() -> Self {
        Self {
            mode_match: 1.0,
            phase_mismatch_rad: 0.0,
            dark_count: 0.0,
            detector_eff: 1.0,
            ec_inefficiency: 1.0,
        }
    }

    /// Shipped noisy preset. These are calibration values, not measured ones.
    pub fn calibrated() -> Self {
        Self {
            mode_match: 0.99,
            phase_mismatch_rad: 0.01,
            dark_count: 1e-6,
            detector_eff: 0.32,
            ec_inefficiency: 1.15,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::domain(format!("{what} out of range: {v}")));
        if !(0.0..=1.0).contains(&self.mode_match) {
            return bad("mode match M (expected [0, 1])", self.mode_match);
        }
        if !self.phase_mismatch_rad.is_finite() {
            return bad("phase mismatch", self.phase_mismatch_rad);
        }
        if !(0.0..1.0).contains(&self.dark_count) {
            return bad("dark count p_d (expected [0, 1))", self.dark_count);
        }
        if !(self.detector_eff > 0.0 && self.detector_eff <= 1.0) {
            return bad("detector efficiency (expected (0, 1])", self.detector_eff);
        }
        if !(self.ec_inefficiency >= 1.0 && self.ec_inefficiency.is_finite()) {
            return bad("EC inefficiency f_EC (expected >= 1)", self.ec_inefficiency);
        }
        Ok(())
    }
}

impl Default for ImperfectionParams {
    fn default() -> Self {
        Self::calibrated()
    }
}
