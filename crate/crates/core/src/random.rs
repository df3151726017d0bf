//! Counter-based random streams and multinomial sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Stream domains keep the draws of different pipeline stages independent.
pub const DOMAIN_SAMPLING: u64 = 1;
pub const DOMAIN_BOOTSTRAP: u64 = 2;
pub const DOMAIN_CALIBRATION: u64 = 3;

/// Generator for stream `index` of `domain` under `seed`.
///
/// The key is built from `(seed, domain)` and the ChaCha stream id is
/// `index`, so any stream can be reproduced without replaying the others.
pub fn stream_rng(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&domain.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Index of the `sub`-th stream under `parent`, for two-level schemes such as
/// (window, bootstrap resample).
pub fn child_index(parent: u64, sub: u64) -> u64 {
    parent.wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(29) ^ sub
}

/// Draws `trials` categorical outcomes with probabilities `probs` and returns
/// the per-category counts, using sequential conditional binomials.
pub fn sample_multinomial<R: Rng + ?Sized, const K: usize>(
    rng: &mut R,
    trials: u64,
    probs: &[f64; K],
) -> Result<[u64; K]> {
    if probs.iter().any(|p| !p.is_finite() || *p < -1e-12) {
        return Err(Error::InvalidArgument(format!("bad probabilities {probs:?}")));
    }
    let total: f64 = probs.iter().map(|p| p.max(0.0)).sum();
    if total <= 0.0 {
        return Err(Error::InvalidArgument("probabilities sum to zero".into()));
    }
    let mut counts = [0u64; K];
    let mut remaining = trials;
    let mut mass = total;
    for k in 0..K {
        if remaining == 0 {
            break;
        }
        if k + 1 == K {
            counts[k] = remaining;
            break;
        }
        let p = probs[k].max(0.0);
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q)
            .map_err(|e| Error::InvalidArgument(format!("binomial({remaining}, {q}): {e}")))?
            .sample(rng);
        counts[k] = draw;
        remaining -= draw;
        mass -= p;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = stream_rng(7, DOMAIN_SAMPLING, 3).next_u64();
        assert_eq!(a, stream_rng(7, DOMAIN_SAMPLING, 3).next_u64());
        assert_ne!(a, stream_rng(7, DOMAIN_SAMPLING, 4).next_u64());
        assert_ne!(a, stream_rng(7, DOMAIN_BOOTSTRAP, 3).next_u64());
        assert_ne!(a, stream_rng(8, DOMAIN_SAMPLING, 3).next_u64());
    }

    #[test]
    fn multinomial_counts_sum_to_trials() {
        let mut rng = stream_rng(0, 0, 0);
        for trials in [0u64, 1, 17, 1_000_000] {
            let c = sample_multinomial(&mut rng, trials, &[0.1, 0.2, 0.3, 0.4]).unwrap();
            assert_eq!(c.iter().sum::<u64>(), trials);
        }
        let c = sample_multinomial(&mut rng, 500, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(c, [500, 0, 0, 0]);
        let c = sample_multinomial(&mut rng, 500, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(c, [0, 0, 0, 500]);
        assert!(sample_multinomial(&mut rng, 5, &[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn multinomial_means_match() {
        let probs = [0.05, 0.25, 0.3, 0.4];
        let trials = 10_000u64;
        let reps = 400;
        let mut sums = [0f64; 4];
        for i in 0..reps {
            let c = sample_multinomial(&mut stream_rng(1, 9, i), trials, &probs).unwrap();
            for k in 0..4 {
                sums[k] += c[k] as f64;
            }
        }
        for k in 0..4 {
            let mean = sums[k] / reps as f64 / trials as f64;
            let se = (probs[k] * (1.0 - probs[k]) / (trials as f64 * reps as f64)).sqrt();
            assert!((mean - probs[k]).abs() < 5.0 * se, "k={k}: {mean}");
        }
    }
}
