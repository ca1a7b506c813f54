use num_complex::Complex64;
use serde::Serialize;

use super::{Announcement, SignalBasis};
use crate::error::{Error, Result};
use crate::linalg::{HermitianMatrix4, Matrix4, MatrixDump, C64};

/// Eve's effective measurement in the basis `(e00, e11, e01, e10)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Povm4 {
    pub e_plus: HermitianMatrix4,
    pub e_minus: HermitianMatrix4,
    pub e_inconclusive: HermitianMatrix4,
    pub e_double: HermitianMatrix4,
}

impl Povm4 {
    pub fn element(&self, gamma: Announcement) -> &HermitianMatrix4 {
        match gamma {
            Announcement::Plus => &self.e_plus,
            Announcement::Minus => &self.e_minus,
            Announcement::Inconclusive => &self.e_inconclusive,
            Announcement::Double => &self.e_double,
        }
    }

    pub fn sum(&self) -> HermitianMatrix4 {
        self.e_plus + self.e_minus + self.e_inconclusive + self.e_double
    }

    /// Largest entrywise deviation of the element sum from the identity.
    pub fn completeness_defect(&self) -> f64 {
        self.sum().matrix().max_abs_diff(&Matrix4::identity())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut m = f64::INFINITY;
        for g in Announcement::ALL {
            m = m.min(self.element(g).eigenvalues()?[0]);
        }
        Ok(m)
    }

    /// `<phi_ab| E^gamma |phi_ab>` for every announcement.
    pub fn outcome_probabilities(&self, basis: &SignalBasis, a: u8, b: u8) -> [f64; 4] {
        let phi = basis.signal(a, b);
        Announcement::ALL.map(|g| self.element(g).matrix().sandwich(&phi, &phi).re)
    }

    pub fn dump(&self) -> Result<PovmDump> {
        Ok(PovmDump {
            e_plus: MatrixDump::of(&self.e_plus)?,
            e_minus: MatrixDump::of(&self.e_minus)?,
            e_inconclusive: MatrixDump::of(&self.e_inconclusive)?,
            e_double: MatrixDump::of(&self.e_double)?,
            completeness_defect: self.completeness_defect(),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PovmDump {
    pub e_plus: MatrixDump,
    pub e_minus: MatrixDump,
    pub e_inconclusive: MatrixDump,
    pub e_double: MatrixDump,
    pub completeness_defect: f64,
}

fn check_channel(eta: f64, mu: f64) -> Result<SignalBasis> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::domain(format!("transmittance {eta} outside (0, 1]")));
    }
    SignalBasis::new(mu)
}

/// Inconclusive element, shared by the loss-only and mismatch models.
fn inconclusive(lambda: f64, zeta: f64, c0: f64, c1: f64) -> HermitianMatrix4 {
    let (c02, c12) = (c0 * c0, c1 * c1);
    let l2 = lambda * lambda;
    let off = l2 * (1.0 - zeta * zeta) / (4.0 * c02 * c12);
    HermitianMatrix4::symmetrized(Matrix4::diagonal([
        l2 * (1.0 + zeta).powi(2) / (4.0 * c02 * c02),
        l2 * (1.0 - zeta).powi(2) / (4.0 * c12 * c12),
        off,
        off,
    ]))
}

// lambda = exp(-sqrt(eta) mu), zeta = exp(-2 (1 - sqrt(eta)) mu)
fn lambda_zeta(eta: f64, mu: f64) -> (f64, f64) {
    let sq = eta.sqrt();
    ((-sq * mu).exp(), (-2.0 * (1.0 - sq) * mu).exp())
}

/// Loss-only POVM; the double-click element vanishes.
pub fn lossonly_povm(eta: f64, mu: f64) -> Result<Povm4> {
    let basis = check_channel(eta, mu)?;
    let (c0, c1) = (basis.c0(), basis.c1());
    let (c02, c12) = (c0 * c0, c1 * c1);
    let (lambda, zeta) = lambda_zeta(eta, mu);
    let l2 = lambda * lambda;
    let click = -(-2.0 * eta.sqrt() * mu).exp_m1();
    let even = 1.0 - l2 * zeta * zeta;
    let odd = 1.0 + l2 * zeta * zeta;

    let build = |sign: f64| {
        let k_even = click * even / (8.0 * c02 * c12) * sign;
        let k_odd = click * odd / (8.0 * c02 * c12);
        HermitianMatrix4::symmetrized(Matrix4::from_real([
            [click * even / (8.0 * c02 * c02), k_even, 0.0, 0.0],
            [k_even, click * even / (8.0 * c12 * c12), 0.0, 0.0],
            [0.0, 0.0, k_odd, k_odd * sign],
            [0.0, 0.0, k_odd * sign, k_odd],
        ]))
    };
    Ok(Povm4 {
        e_plus: build(1.0),
        e_minus: build(-1.0),
        e_inconclusive: inconclusive(lambda, zeta, c0, c1),
        e_double: HermitianMatrix4::zeros(),
    })
}

/// POVM with mode overlap `m` and phase mismatch `delta` between the arriving
/// pulses. The double-click element is fixed by completeness.
pub fn mismatch_povm(eta: f64, mu: f64, m: f64, delta: f64) -> Result<Povm4> {
    let basis = check_channel(eta, mu)?;
    if !(0.0..=1.0).contains(&m) {
        return Err(Error::domain(format!("mode match {m} outside [0, 1]")));
    }
    let (c0, c1) = (basis.c0(), basis.c1());
    let (c02, c12) = (c0 * c0, c1 * c1);
    let (lambda, zeta) = lambda_zeta(eta, mu);
    let sq = eta.sqrt();
    let sm = m.sqrt();
    let u = 1.0 + sm * delta.cos();
    let v = 1.0 - sm * delta.cos();
    let w = sm * delta.sin();

    let lu = (-sq * mu * u).exp();
    let lv = (-sq * mu * v).exp();
    let z2 = zeta * zeta;
    let p = -(-sq * mu * u).exp_m1() * lv;
    let q = (lu * lu - lu) * lv * z2;
    let a = -(-sq * mu * v).exp_m1() * lu;
    let b = (lv * lv - lv) * lu * z2;
    // lambda^(1 + i w) - lambda = lambda (exp(-i w sqrt(eta) mu) - 1)
    let r = Complex64::from_polar(1.0, -w * sq * mu) - 1.0;
    let r = r * lambda * lambda * zeta;
    let s = r.conj();

    let k = 8.0 * c02 * c12;
    let re = |x: f64| C64::new(x, 0.0);
    let build = |sign: f64| {
        let mut e = Matrix4::zeros();
        e[(0, 0)] = (re(p + q + a + b) + (r + s) * 2.0) / (8.0 * c02 * c02);
        e[(1, 1)] = (re(p + q + a + b) - (r + s) * 2.0) / (8.0 * c12 * c12);
        e[(0, 1)] = re(sign * (p + q - a - b) / k);
        e[(1, 0)] = e[(0, 1)];
        e[(2, 2)] = re((p - q + a - b) / k);
        e[(3, 3)] = e[(2, 2)];
        e[(2, 3)] = (re(p - q - a + b) + (r - s) * 2.0) * (sign / k);
        e[(3, 2)] = (re(p - q - a + b) - (r - s) * 2.0) * (sign / k);
        HermitianMatrix4::symmetrized(e)
    };
    let e_plus = build(1.0);
    let e_minus = build(-1.0);
    let e_inconclusive = inconclusive(lambda, zeta, c0, c1);
    let e_double = HermitianMatrix4::identity() - e_plus - e_minus - e_inconclusive;
    Ok(Povm4 {
        e_plus,
        e_minus,
        e_inconclusive,
        e_double,
    })
}

/// Folds independent dark counts with probability `pd` into a POVM.
pub fn model_povm(mismatch: &Povm4, pd: f64) -> Result<Povm4> {
    if !(0.0..1.0).contains(&pd) {
        return Err(Error::domain(format!("dark count probability {pd} outside [0, 1)")));
    }
    let keep = 1.0 - pd;
    let e_q = mismatch.e_inconclusive;
    Ok(Povm4 {
        e_plus: keep * mismatch.e_plus + (keep * pd) * e_q,
        e_minus: keep * mismatch.e_minus + (keep * pd) * e_q,
        e_inconclusive: (keep * keep) * e_q,
        e_double: mismatch.e_double
            + pd * mismatch.e_plus
            + pd * mismatch.e_minus
            + (pd * pd) * e_q,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lossonly_single_click_probabilities() {
        let (eta, mu) = (0.3, 0.4);
        let povm = lossonly_povm(eta, mu).unwrap();
        let basis = SignalBasis::new(mu).unwrap();
        let click = 1.0 - (-2.0 * eta.sqrt() * mu).exp();
        let same = povm.outcome_probabilities(&basis, 0, 0);
        let diff = povm.outcome_probabilities(&basis, 0, 1);
        assert!((same[0] - click).abs() < 1e-14);
        assert!(diff[0].abs() < 1e-14);
        assert!((diff[1] - click).abs() < 1e-14);
        assert_eq!(povm.e_double, HermitianMatrix4::zeros());
    }

    #[test]
    fn perfect_overlap_matches_lossonly() {
        for &(eta, mu) in &[(0.3, 0.4), (1e-3, 0.05), (1.0, 1.0), (0.05, 2.0)] {
            let a = lossonly_povm(eta, mu).unwrap();
            let b = mismatch_povm(eta, mu, 1.0, 0.0).unwrap();
            for g in Announcement::ALL {
                let d = a.element(g).matrix().max_abs_diff(b.element(g).matrix());
                assert!(d < 1e-12, "{g:?} differs by {d}");
            }
        }
    }

    #[test]
    fn phase_flip_swaps_plus_and_minus_on_key_blocks() {
        let flipped = mismatch_povm(0.2, 0.3, 1.0, std::f64::consts::PI).unwrap();
        let plain = mismatch_povm(0.2, 0.3, 1.0, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i / 2 == j / 2 {
                    let d = (flipped.e_plus.matrix()[(i, j)] - plain.e_minus.matrix()[(i, j)]).norm();
                    assert!(d < 1e-12, "({i},{j}) differs by {d}");
                }
            }
        }
    }

    #[test]
    fn dark_count_folding() {
        let mm = mismatch_povm(0.1, 0.2, 0.95, 0.1).unwrap();
        assert_eq!(model_povm(&mm, 0.0).unwrap(), mm);
        let half = model_povm(&mm, 0.5).unwrap();
        let want = mm.e_inconclusive.scale(0.25);
        assert!(half.e_inconclusive.matrix().max_abs_diff(want.matrix()) < 1e-16);
        assert!(model_povm(&mm, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn model_povm_is_complete_and_positive(
            eta in 1e-4f64..1.0,
            mu in 1e-3f64..2.0,
            m in 0.0f64..=1.0,
            delta in -3.2f64..3.2,
            pd in 0.0f64..0.2,
        ) {
            let povm = model_povm(&mismatch_povm(eta, mu, m, delta).unwrap(), pd).unwrap();
            prop_assert!(povm.completeness_defect() <= 1e-10);
            prop_assert!(povm.min_eigenvalue().unwrap() >= -1e-12);
        }
    }
}
