//! Seeded random streams. Every stochastic routine takes a master seed and
//! derives independent ChaCha streams by mixing in a stream label, so that
//! worker `i` of a run always sees the same numbers regardless of thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type Rng = ChaCha20Rng;

/// SplitMix64 finalizer; bijective, so distinct labels give distinct seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn stream(seed: u64, label: u64) -> Rng {
    let mut rng = Rng::seed_from_u64(mix(seed) ^ mix(label.wrapping_add(0x5151)));
    rng.set_stream(label);
    rng
}

pub fn child_seed(seed: u64, label: u64) -> u64 {
    mix(mix(seed) ^ label.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}
