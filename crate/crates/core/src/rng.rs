//! Seed derivation. Every random stream in the engine is a ChaCha8 generator
//! keyed by a root seed plus a path of tags, so independent consumers never
//! share state and results do not depend on call order across consumers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `seed`.
pub fn derive(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix(seed), |acc, &t| splitmix(acc ^ splitmix(t)))
}

pub fn seeded(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tags))
}

/// Tags naming the engine's random streams.
pub mod stream {
    pub const SCHEDULE: u64 = 1;
    pub const INIT: u64 = 2;
    pub const PRETRAIN_BATCHES: u64 = 3;
    pub const STREAM_BATCHES: u64 = 4;
    pub const DROPOUT: u64 = 5;
    pub const REPLAY: u64 = 6;
    pub const GENERATOR: u64 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn distinct_tags_give_distinct_streams() {
        let a: u64 = seeded(1, &[2, 3]).random();
        let b: u64 = seeded(1, &[3, 2]).random();
        let c: u64 = seeded(1, &[2, 3]).random();
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
