//! Reproducible per-replicate random streams.
//!
//! Every replicate gets its own ChaCha8 stream keyed by the master seed and
//! selected by the replicate index. ChaCha is counter-based, so a stream can
//! be positioned anywhere without generating the intermediate output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ReplicateRng = ChaCha8Rng;

/// Independent stream for replicate `replicate_index` under `master_seed`.
pub fn stream_for(master_seed: u64, replicate_index: u64) -> ReplicateRng {
    debug_assert!(replicate_index < 1 << 63);
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replicate_index);
    rng
}

/// Skip `words` 32-bit outputs of `rng` in constant time.
pub fn jump_ahead(rng: &mut ReplicateRng, words: u128) {
    let pos = rng.get_word_pos();
    rng.set_word_pos(pos + words);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn same_seed_and_index_is_identical() {
        let mut a = stream_for(7, 3);
        let mut b = stream_for(7, 3);
        for _ in 0..1_000_000 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let n = 100_000;
        let mut a = stream_for(11, 0);
        let mut b = stream_for(11, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.random::<f64>()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.random::<f64>()).collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let my = ys.iter().sum::<f64>() / n as f64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(&ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 3.0 / (n as f64).sqrt(), "corr = {corr}");
    }

    #[test]
    fn jump_ahead_matches_sequential_generation() {
        let mut seq = stream_for(5, 9);
        for _ in 0..1000 {
            seq.random::<u32>();
        }
        let mut jumped = stream_for(5, 9);
        jump_ahead(&mut jumped, 1000);
        for _ in 0..100 {
            assert_eq!(seq.random::<u32>(), jumped.random::<u32>());
        }
    }

    #[test]
    fn exponential_mean_matches_rate() {
        let rate = 3.5;
        let n = 1_000_000;
        let mut rng = stream_for(1, 0);
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x: f64 = Exp1.sample(&mut rng);
            let x = x / rate;
            s += x;
            s2 += x * x;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / rate).abs() < 4.0 * se);
    }
}
