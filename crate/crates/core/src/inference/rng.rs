//! Seed derivation: one stream per (chain, sweep, step), with a further
//! per-event substream in the assignment step.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED_u64, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(seed: u64, chain: u64, sweep: u64, step: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut s = mix(&[seed, chain, sweep, step]);
    for chunk in key.chunks_mut(8) {
        s = splitmix64(s);
        chunk.copy_from_slice(&s.to_le_bytes());
    }
    ChaCha8Rng::from_seed(key)
}

pub fn substream(seed: u64, chain: u64, sweep: u64, step: u64, index: u64) -> ChaCha8Rng {
    let mut rng = stream(seed, chain, sweep, step);
    rng.set_stream(index);
    rng
}
