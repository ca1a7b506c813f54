use std::f64::consts::FRAC_PI_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{widths_from_log, BeamParams, BeamStatistics};
use crate::error::Result;

/// Sample `index` of the stream keyed by `seed`. Each index owns its own
/// ChaCha stream, so results do not depend on evaluation order.
pub fn sample_one(stats: &BeamStatistics, seed: u64, index: u64) -> Result<BeamParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let z: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
    let psi = rng.random_range(0.0..=FRAC_PI_2);

    let l = stats.factor();
    let g: [f64; 4] = std::array::from_fn(|i| {
        stats.mean()[i] + (0..4).map(|k| l[i][k] * z[k]).sum::<f64>()
    });
    let (x0, y0) = (g[0], g[1]);
    let theta0 = if x0 == 0.0 && y0 == 0.0 { 0.0 } else { y0.atan2(x0) };
    BeamParams::new(
        x0,
        y0,
        widths_from_log(g[2], stats.w0_m()),
        widths_from_log(g[3], stats.w0_m()),
        theta0 + psi,
    )
}

/// `n` beam samples, indices `0..n` of the stream keyed by `seed`.
pub fn sample_beam_params(stats: &BeamStatistics, n: usize, seed: u64) -> Result<Vec<BeamParams>> {
    sample_range(stats, 0, n, seed)
}

pub(crate) fn sample_range(
    stats: &BeamStatistics,
    start: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<BeamParams>> {
    (start..start + n)
        .into_par_iter()
        .map(|i| sample_one(stats, seed, i as u64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_distribution() {
        let stats = BeamStatistics::new([0.0; 4], [[0.0; 4]; 4], 0.15).unwrap();
        for v in sample_beam_params(&stats, 50, 7).unwrap() {
            assert_eq!((v.x0_m(), v.y0_m(), v.w1_m(), v.w2_m()), (0.0, 0.0, 0.15, 0.15));
            assert!((0.0..=FRAC_PI_2).contains(&v.orient_rad()));
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let mut cov = [[0.0; 4]; 4];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] = 0.01 * (i + 1) as f64;
        }
        let stats = BeamStatistics::new([0.1, -0.1, 0.5, 0.4], cov, 0.15).unwrap();
        let a = sample_beam_params(&stats, 200, 42).unwrap();
        let b = sample_beam_params(&stats, 200, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_beam_params(&stats, 200, 43).unwrap();
        assert_ne!(a, c);
        // a prefix of a longer run is the shorter run
        assert_eq!(&sample_beam_params(&stats, 300, 42).unwrap()[..200], &a[..]);
    }

    #[test]
    fn sample_means_match_moments() {
        let n = 100_000;
        let sigma2 = 0.01;
        let mut cov = [[0.0; 4]; 4];
        for (i, row) in cov.iter_mut().enumerate() {
            row[i] = sigma2;
        }
        let mean = [0.2, -0.3, 0.8, 1.1];
        let stats = BeamStatistics::new(mean, cov, 0.15).unwrap();
        let samples = sample_beam_params(&stats, n, 11).unwrap();
        let bound = 5.0 * sigma2.sqrt() / (n as f64).sqrt();
        let avg = |f: &dyn Fn(&BeamParams) -> f64| samples.iter().map(f).sum::<f64>() / n as f64;
        let theta = |w: f64| (w * w / (0.15 * 0.15)).ln();
        assert!((avg(&|v| v.x0_m()) - mean[0]).abs() < bound);
        assert!((avg(&|v| v.y0_m()) - mean[1]).abs() < bound);
        assert!((avg(&|v| theta(v.w1_m())) - mean[2]).abs() < bound);
        assert!((avg(&|v| theta(v.w2_m())) - mean[3]).abs() < bound);
    }
}
