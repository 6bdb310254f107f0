//! Named, seedable random streams.
//!
//! Every consumer of randomness (environment sampling, selector draws,
//! parameter initialisation, ...) owns its own stream. A stream is keyed by a
//! master seed and a name; the 256-bit ChaCha seed is the SHA-256 digest of
//! both, so distinct names never share a sequence and results do not depend
//! on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Open the stream `name` under `master_seed`.
pub fn stream(master_seed: u64, name: &str) -> StreamRng {
    let mut hasher = Sha256::new();
    hasher.update(master_seed.to_le_bytes());
    hasher.update((name.len() as u64).to_le_bytes());
    hasher.update(name.as_bytes());
    let seed: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(seed)
}

/// Uniform draw in `[0, 1)`.
#[inline]
pub fn uniform<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Inverse-CDF draw over `probs` in index order.
///
/// Probabilities are accumulated left to right; the first index whose
/// cumulative mass exceeds the uniform draw is returned. If rounding leaves
/// the total slightly below one, the last index with positive mass absorbs
/// the remainder.
pub fn sample_index<R: rand::Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u = uniform(rng);
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = i;
        }
        acc += p;
        if u < acc {
            return i;
        }
    }
    last_positive
}
