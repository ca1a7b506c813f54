//! One-dimensional maximisation of a key rate over the signal intensity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationSpec {
    pub mu_min: f64,
    pub mu_max: f64,
    pub coarse_points: usize,
    /// Absolute tolerance on `mu`.
    pub tolerance: f64,
}

impl Default for OptimizationSpec {
    fn default() -> Self {
        Self {
            mu_min: 1e-4,
            mu_max: 2.0,
            coarse_points: 64,
            tolerance: 1e-5,
        }
    }
}

impl OptimizationSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_min > 0.0 && self.mu_min < self.mu_max && self.mu_max.is_finite()) {
            return Err(Error::Config(format!(
                "optimizer needs 0 < mu_min < mu_max, got [{}, {}]",
                self.mu_min, self.mu_max
            )));
        }
        if self.coarse_points < 8 {
            return Err(Error::Config(format!(
                "optimizer needs at least 8 coarse points, got {}",
                self.coarse_points
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config(format!(
                "optimizer tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Log-spaced coarse grid from `mu_min` to `mu_max` inclusive.
    pub fn coarse_grid(&self) -> Vec<f64> {
        let n = self.coarse_points;
        let (lo, hi) = (self.mu_min.ln(), self.mu_max.ln());
        (0..n)
            .map(|i| match i {
                0 => self.mu_min,
                i if i == n - 1 => self.mu_max,
                i => (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Optimum {
    pub mu_star: f64,
    pub rate_star: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Coarse log-grid scan followed by golden-section refinement in the bracket
/// around the best grid point.
pub fn optimize_intensity(
    rate_fn: impl Fn(f64) -> Result<f64>,
    spec: &OptimizationSpec,
) -> Result<Optimum> {
    spec.validate()?;
    let eval = |mu: f64| -> Result<f64> {
        let r = rate_fn(mu)?;
        if !r.is_finite() {
            return Err(Error::Numerical(format!("rate function returned {r} at mu = {mu}")));
        }
        Ok(r)
    };

    let grid = spec.coarse_grid();
    let values = grid.iter().map(|&mu| eval(mu)).collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let coarse = Optimum {
        mu_star: grid[best],
        rate_star: values[best],
    };

    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(grid.len() - 1)];
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while (b - a).abs() > spec.tolerance {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d)?;
        }
    }
    let (mu, r) = if fc >= fd { (c, fc) } else { (d, fd) };
    if r >= coarse.rate_star {
        Ok(Optimum {
            mu_star: mu,
            rate_star: r,
        })
    } else {
        Ok(coarse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyrate::lossonly_keyrate;
    use proptest::prelude::*;

    #[test]
    fn parabola() {
        let spec = OptimizationSpec {
            mu_min: 0.01,
            mu_max: 1.0,
            ..OptimizationSpec::default()
        };
        let opt = optimize_intensity(|mu| Ok(1.0 - (mu - 0.3) * (mu - 0.3)), &spec).unwrap();
        assert!((opt.mu_star - 0.3).abs() <= spec.tolerance);
    }

    #[test]
    fn constant() {
        let spec = OptimizationSpec::default();
        let opt = optimize_intensity(|_| Ok(0.25), &spec).unwrap();
        assert_eq!(opt.rate_star, 0.25);
        assert!((spec.mu_min..=spec.mu_max).contains(&opt.mu_star));
    }

    #[test]
    fn lossonly_matches_brute_force_grid() {
        let spec = OptimizationSpec::default();
        let eta = 0.01;
        let opt = optimize_intensity(|mu| Ok(lossonly_keyrate(eta, mu)), &spec).unwrap();
        let n = 100_000;
        let brute = (0..n)
            .map(|i| spec.mu_min + (spec.mu_max - spec.mu_min) * i as f64 / (n - 1) as f64)
            .map(|mu| lossonly_keyrate(eta, mu))
            .fold(f64::MIN, f64::max);
        assert!(opt.rate_star >= brute - 2.0 * spec.tolerance, "{opt:?} vs {brute}");
        assert!((opt.rate_star - brute).abs() <= 2.0 * spec.tolerance);
    }

    #[test]
    fn non_finite_rate_names_mu() {
        let err = optimize_intensity(
            |mu| Ok(if mu > 0.5 { f64::NAN } else { mu }),
            &OptimizationSpec::default(),
        )
        .unwrap_err();
        assert!(err.to_string().contains("mu ="), "{err}");
    }

    #[test]
    fn bad_specs() {
        let mut s = OptimizationSpec::default();
        s.coarse_points = 4;
        assert!(s.validate().is_err());
        s = OptimizationSpec::default();
        s.mu_min = 3.0;
        assert!(s.validate().is_err());
    }

    proptest! {
        #[test]
        fn never_worse_than_grid_and_deterministic(eta in 1e-5f64..1.0) {
            let spec = OptimizationSpec::default();
            let f = |mu: f64| Ok(lossonly_keyrate(eta, mu));
            let a = optimize_intensity(f, &spec).unwrap();
            let b = optimize_intensity(f, &spec).unwrap();
            prop_assert_eq!(a, b);
            let grid_best = spec.coarse_grid().into_iter().map(|mu| lossonly_keyrate(eta, mu)).fold(f64::MIN, f64::max);
            prop_assert!(a.rate_star >= grid_best);
        }
    }
}
