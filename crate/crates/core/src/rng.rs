//! Reproducible random streams.
//!
//! Every replicate draws from its own ChaCha8 stream keyed by
//! `(base_seed, experiment, replicate)`. Results therefore depend only on
//! the key and never on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomStream = ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for replicate `replicate` of experiment `experiment`.
pub fn stream(base_seed: u64, experiment: u64, replicate: u64) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(base_seed ^ mix64(experiment)));
    rng.set_stream(replicate);
    rng
}

/// Derives an experiment id from a label and numeric parameters, so that
/// distinct sweep points never share streams.
pub fn experiment_id(label: &str, params: &[f64]) -> u64 {
    let mut h = 0xCBF2_9CE4_8422_2325u64;
    for b in label.bytes() {
        h = (h ^ u64::from(b)).wrapping_mul(0x100_0000_01B3);
    }
    for p in params {
        h = mix64(h ^ p.to_bits());
    }
    h
}
