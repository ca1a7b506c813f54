use serde::Serialize;

use super::{
    announcement_stats, devetak_winter_rate, ec_leakage, mismatch_povm, model_povm, Announcement,
    AnnouncementStats, ImperfectionParams, SignalBasis,
};
use crate::error::{Error, Result, StageExt};
use crate::linalg::{HermitianMatrix4, Matrix4, C64};

/// Trace tolerance for density matrices.
const TRACE_TOL: f64 = 1e-8;
/// Eigenvalues at or below this contribute no entropy.
const ENTROPY_FLOOR: f64 = 1e-15;
/// Conditional weights at or below this are dropped from the Holevo sums.
const WEIGHT_FLOOR: f64 = 1e-15;
/// `<phi|E|phi>` at or below this counts as an impossible announcement.
const MIN_CONDITIONAL_TRACE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4 {
    matrix: HermitianMatrix4,
    eigenvalues: [f64; 4],
}

impl DensityMatrix4 {
    pub fn new(matrix: HermitianMatrix4) -> Result<Self> {
        let tr = matrix.trace();
        if !((tr - 1.0).abs() <= TRACE_TOL) {
            return Err(Error::Numerical(format!("density matrix trace {tr} is not 1")));
        }
        let eigenvalues = matrix.eigenvalues()?;
        if eigenvalues[0] < -crate::linalg::SQRT_CLAMP {
            return Err(Error::NotPsd {
                min_eigenvalue: eigenvalues[0],
            });
        }
        Ok(Self {
            matrix,
            eigenvalues,
        })
    }

    /// `|psi><psi| / <psi|psi>`
    pub fn pure(psi: &[C64; 4]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if !(norm > MIN_CONDITIONAL_TRACE) {
            return Err(Error::Numerical(
                "conditional state has zero trace; announcement impossible for this signal".into(),
            ));
        }
        let outer = Matrix4::outer(psi, psi).scale(1.0 / norm);
        Self::new(HermitianMatrix4::symmetrized(outer))
    }

    pub fn mixture(parts: &[(f64, &DensityMatrix4)]) -> Result<Self> {
        let mut acc = HermitianMatrix4::zeros();
        for (w, rho) in parts {
            acc = acc + *w * rho.matrix;
        }
        Self::new(acc)
    }

    pub fn matrix(&self) -> &HermitianMatrix4 {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        self.eigenvalues
    }
}

/// `S(rho) = -tr(rho log2 rho)`.
pub fn von_neumann_entropy(rho: &DensityMatrix4) -> f64 {
    rho.eigenvalues
        .iter()
        .filter(|&&l| l > ENTROPY_FLOOR)
        .map(|&l| -l * l.log2())
        .sum::<f64>()
        .clamp(0.0, 2.0)
}

/// Eve's state `sqrt(E) |phi_ab><phi_ab| sqrt(E) / tr` after announcement `E`.
pub fn eve_conditional_state(
    povm_gamma: &HermitianMatrix4,
    a: u8,
    b: u8,
    basis: &SignalBasis,
) -> Result<DensityMatrix4> {
    let root = povm_gamma.sqrt_psd()?;
    conditional_from_root(&root, a, b, basis)
}

fn conditional_from_root(
    root: &HermitianMatrix4,
    a: u8,
    b: u8,
    basis: &SignalBasis,
) -> Result<DensityMatrix4> {
    DensityMatrix4::pure(&root.matrix().apply(&basis.signal(a, b)))
}

/// `chi(A:E)` for a key announcement, given Eve's states `states[a][b]`.
///
/// States whose conditional weight is negligible may be `None`.
pub fn holevo_information(
    gamma: Announcement,
    stats: &AnnouncementStats,
    states: &[[Option<DensityMatrix4>; 2]; 2],
) -> Result<f64> {
    let g = match gamma {
        Announcement::Plus => 0,
        Announcement::Minus => 1,
        other => {
            return Err(Error::domain(format!(
                "no key is kept for announcement {other:?}; Holevo term undefined"
            )))
        }
    };
    let state = |a: usize, b: usize| -> Result<Option<(f64, &DensityMatrix4)>> {
        let w = stats.conditional(g, a, b);
        if w <= WEIGHT_FLOOR {
            return Ok(None);
        }
        match &states[a][b] {
            Some(rho) => Ok(Some((w, rho))),
            None => Err(Error::Numerical(format!(
                "missing Eve state for a={a}, b={b} with weight {w:e}"
            ))),
        }
    };

    let mut all = Vec::with_capacity(4);
    let mut conditional_entropy = 0.0;
    for a in 0..2 {
        let parts: Vec<(f64, &DensityMatrix4)> =
            (0..2).filter_map(|b| state(a, b).transpose()).collect::<Result<_>>()?;
        let pa: f64 = parts.iter().map(|(w, _)| w).sum();
        if pa <= WEIGHT_FLOOR {
            continue;
        }
        let scaled: Vec<(f64, &DensityMatrix4)> = parts.iter().map(|&(w, r)| (w / pa, r)).collect();
        conditional_entropy += pa * von_neumann_entropy(&DensityMatrix4::mixture(&scaled)?);
        all.extend(parts);
    }
    let total: f64 = all.iter().map(|(w, _)| w).sum();
    let normalized: Vec<(f64, &DensityMatrix4)> = all.iter().map(|&(w, r)| (w / total, r)).collect();
    let joint_entropy = von_neumann_entropy(&DensityMatrix4::mixture(&normalized)?);
    Ok((joint_entropy - conditional_entropy).clamp(0.0, 2.0))
}

/// Contribution of one key announcement to the noisy rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnnouncementRate {
    pub probability: f64,
    pub error_rate: f64,
    pub holevo: f64,
    pub leakage: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoisyRate {
    pub plus: AnnouncementRate,
    pub minus: AnnouncementRate,
    pub stats: AnnouncementStats,
    pub rate: f64,
}

/// Noisy key rate per pulse; `eta` is the total transmittance.
pub fn noisy_keyrate(eta: f64, mu: f64, imp: &ImperfectionParams) -> Result<f64> {
    if eta == 0.0 {
        return Ok(0.0);
    }
    Ok(noisy_keyrate_detailed(eta, mu, imp)?.rate)
}

pub fn noisy_keyrate_detailed(eta: f64, mu: f64, imp: &ImperfectionParams) -> Result<NoisyRate> {
    imp.validate().stage("imperfections")?;
    let basis = SignalBasis::new(mu).stage("signal basis")?;
    let mm = mismatch_povm(eta, mu, imp.mode_match, imp.phase_mismatch_rad).stage("mismatch_povm")?;
    let povm = model_povm(&mm, imp.dark_count).stage("model_povm")?;
    let stats = announcement_stats(eta, mu, imp).stage("announcement_stats")?;

    let per_gamma = |gamma: Announcement, g: usize| -> Result<AnnouncementRate> {
        let root = povm.element(gamma).sqrt_psd().stage("matrix_sqrt_psd")?;
        let mut states: [[Option<DensityMatrix4>; 2]; 2] = Default::default();
        for a in 0..2u8 {
            for b in 0..2u8 {
                if stats.conditional(g, a as usize, b as usize) > WEIGHT_FLOOR {
                    states[a as usize][b as usize] = Some(
                        conditional_from_root(&root, a, b, &basis).stage("eve_conditional_state")?,
                    );
                }
            }
        }
        let holevo = holevo_information(gamma, &stats, &states).stage("holevo_information")?;
        let error_rate = stats.eps(g);
        let leakage = ec_leakage(error_rate, imp.ec_inefficiency);
        Ok(AnnouncementRate {
            probability: stats.p_gamma(g),
            error_rate,
            holevo,
            leakage,
            rate: devetak_winter_rate(leakage, holevo),
        })
    };
    let plus = per_gamma(Announcement::Plus, 0)?;
    let minus = per_gamma(Announcement::Minus, 1)?;
    let rate = plus.probability * plus.rate + minus.probability * minus.rate;
    Ok(NoisyRate {
        plus,
        minus,
        stats,
        rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::{h2, lossonly_keyrate, lossonly_povm};

    #[test]
    fn entropy_examples() {
        let pure = DensityMatrix4::pure(&[C64::new(0.6, 0.0), C64::new(0.0, 0.8), C64::new(0.0, 0.0), C64::new(0.0, 0.0)]).unwrap();
        assert!(von_neumann_entropy(&pure) < 1e-12);
        let mixed = DensityMatrix4::new(HermitianMatrix4::identity().scale(0.25)).unwrap();
        assert!((von_neumann_entropy(&mixed) - 2.0).abs() < 1e-14);
        let half = DensityMatrix4::new(HermitianMatrix4::new(Matrix4::diagonal([0.5, 0.5, 0.0, 0.0])).unwrap()).unwrap();
        assert!((von_neumann_entropy(&half) - 1.0).abs() < 1e-14);
        assert!(DensityMatrix4::new(HermitianMatrix4::identity()).is_err());
    }

    #[test]
    fn identity_measurement_keeps_signal() {
        let basis = SignalBasis::new(0.3).unwrap();
        let rho = eve_conditional_state(&HermitianMatrix4::identity(), 0, 1, &basis).unwrap();
        let phi = basis.signal(0, 1);
        let want = Matrix4::outer(&phi, &phi);
        assert!(rho.matrix().matrix().max_abs_diff(&want) < 1e-14);
    }

    #[test]
    fn lossonly_states_are_pure() {
        let povm = lossonly_povm(0.2, 0.4).unwrap();
        let basis = SignalBasis::new(0.4).unwrap();
        let rho = eve_conditional_state(&povm.e_plus, 0, 0, &basis).unwrap();
        assert!(von_neumann_entropy(&rho) < 1e-10);
        assert!(eve_conditional_state(&povm.e_plus, 0, 1, &basis).is_err());
    }

    #[test]
    fn identical_states_carry_no_information() {
        let basis = SignalBasis::new(0.3).unwrap();
        let rho = DensityMatrix4::pure(&basis.signal(0, 0)).unwrap();
        let stats = announcement_stats(0.3, 0.3, &ImperfectionParams::calibrated()).unwrap();
        let states = [[Some(rho), Some(rho)], [Some(rho), Some(rho)]];
        let chi = holevo_information(Announcement::Plus, &stats, &states).unwrap();
        assert!(chi.abs() < 1e-12);
        assert!(holevo_information(Announcement::Double, &stats, &states).is_err());
    }

    #[test]
    fn lossonly_holevo_matches_closed_form() {
        for &(eta, mu) in &[(0.5, 0.2), (0.01, 0.1), (1e-4, 0.02), (0.9, 1.0)] {
            let r = noisy_keyrate_detailed(eta, mu, &ImperfectionParams::ideal()).unwrap();
            let sq: f64 = eta.sqrt();
            let want = h2((1.0 - (-4.0 * mu * (1.0 - sq)).exp() * (-2.0 * mu * sq).exp()) / 2.0);
            assert!((r.plus.holevo - want).abs() < 1e-9, "{eta} {mu}: {} vs {want}", r.plus.holevo);
            assert!((r.minus.holevo - r.plus.holevo).abs() < 1e-10);
            assert!((r.rate - lossonly_keyrate(eta, mu)).abs() < 1e-9);
        }
    }

    #[test]
    fn noisy_never_beats_lossonly() {
        let imp = ImperfectionParams::calibrated();
        for &eta in &[1e-4, 1e-3, 0.01, 0.1, 0.5] {
            for &mu in &[0.005, 0.02, 0.1, 0.4, 1.0] {
                let noisy = noisy_keyrate(eta, mu, &imp).unwrap();
                assert!(noisy <= lossonly_keyrate(eta, mu) + 1e-12, "{eta} {mu}");
            }
        }
    }

    #[test]
    fn stage_is_named_on_failure() {
        let err = noisy_keyrate(0.1, -1.0, &ImperfectionParams::ideal()).unwrap_err();
        assert!(err.to_string().contains("signal basis"), "{err}");
    }
}
