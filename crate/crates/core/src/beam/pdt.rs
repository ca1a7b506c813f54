use serde::Serialize;

use crate::error::{Error, Result};

/// Relative frequencies of transmittance on uniform bins over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PdtHistogram {
    bin_edges: Vec<f64>,
    probabilities: Vec<f64>,
}

impl PdtHistogram {
    /// Histogram from explicit bin weights on uniform bins; weights are renormalized.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::domain("histogram weights must be finite and non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::domain("histogram weights sum to zero"));
        }
        let n = weights.len();
        Ok(Self {
            bin_edges: (0..=n).map(|i| i as f64 / n as f64).collect(),
            probabilities: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn n_bins(&self) -> usize {
        self.probabilities.len()
    }

    pub fn center(&self, i: usize) -> f64 {
        0.5 * (self.bin_edges[i] + self.bin_edges[i + 1])
    }

    /// `(center, probability)` for every bin with non-zero probability.
    pub fn occupied(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probabilities
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(|(i, &p)| (self.center(i), p))
    }

    pub fn mean(&self) -> f64 {
        self.occupied().map(|(c, p)| c * p).sum()
    }

    /// Center of the first bin at which the cumulative probability reaches 1/2.
    pub fn median(&self) -> f64 {
        let mut acc = 0.0;
        for (i, p) in self.probabilities.iter().enumerate() {
            acc += p;
            if acc >= 0.5 {
                return self.center(i);
            }
        }
        self.center(self.n_bins() - 1)
    }

    /// Center of the most probable bin (the lowest one on ties).
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        self.center(best)
    }
}

/// Bins transmittance samples into `n_bins` uniform bins on `[0, 1]`.
pub fn pdt_histogram(etas: &[f64], n_bins: usize) -> Result<PdtHistogram> {
    if etas.is_empty() {
        return Err(Error::domain("cannot build a transmittance histogram from no samples"));
    }
    if n_bins == 0 {
        return Err(Error::domain("histogram needs at least one bin"));
    }
    let mut counts = vec![0usize; n_bins];
    for &eta in etas {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::domain(format!("transmittance sample {eta} outside [0, 1]")));
        }
        let i = ((eta * n_bins as f64) as usize).min(n_bins - 1);
        counts[i] += 1;
    }
    let n = etas.len() as f64;
    Ok(PdtHistogram {
        bin_edges: (0..=n_bins).map(|i| i as f64 / n_bins as f64).collect(),
        probabilities: counts.into_iter().map(|c| c as f64 / n).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass() {
        let h = pdt_histogram(&[0.5; 20], 10).unwrap();
        assert_eq!(h.probabilities().iter().filter(|&&p| p > 0.0).count(), 1);
        assert_eq!(h.probabilities()[5], 1.0);
        assert_eq!(h.bin_edges().len(), 11);
    }

    #[test]
    fn two_samples_two_bins() {
        let h = pdt_histogram(&[0.1, 0.9], 2).unwrap();
        assert_eq!(h.probabilities(), &[0.5, 0.5]);
        assert!((h.mean() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn uniform_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let etas: Vec<f64> = (0..10_000).map(|_| rng.random::<f64>()).collect();
        let h = pdt_histogram(&etas, 10).unwrap();
        for p in h.probabilities() {
            assert!((p - 0.1).abs() < 0.015, "{p}");
        }
        assert!((h.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(pdt_histogram(&[], 10).is_err());
        assert!(pdt_histogram(&[1.2], 10).is_err());
        assert!(pdt_histogram(&[0.2], 0).is_err());
    }

    #[test]
    fn statistics_of_bins() {
        let h = PdtHistogram::from_weights(vec![1.0, 3.0, 0.0, 2.0]).unwrap();
        assert_eq!(h.mode(), 0.375);
        assert_eq!(h.median(), 0.375);
        let exact = (0.125 + 3.0 * 0.375 + 2.0 * 0.875) / 6.0;
        assert!((h.mean() - exact).abs() < 1e-15);
        let edge = pdt_histogram(&[1.0, 0.0], 4).unwrap();
        assert_eq!(edge.probabilities(), &[0.5, 0.0, 0.0, 0.5]);
    }
}
