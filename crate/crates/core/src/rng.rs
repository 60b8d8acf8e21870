//! Reproducible random streams.
//!
//! Every random draw derives from a master seed, a stream tag naming the
//! purpose (driver, perturbation, triple sampling, ...) and the ensemble
//! member index. Member `i` always sees the same stream regardless of
//! thread count or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a hash of a stream name.
pub fn tag(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// The generator for `member` of the stream `(seed, tag)`.
pub fn stream(seed: u64, tag: u64, member: u64) -> ChaCha8Rng {
    let mut state = seed ^ tag.rotate_left(17);
    let mut key = [0u8; 32];
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(member);
    rng
}

/// Run `f` for members `0..n` in parallel, each with its own stream, and
/// collect the results in member order.
pub fn par_members<T, F>(n: usize, seed: u64, tag: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, tag, i as u64);
            f(i, &mut rng)
        })
        .collect()
}
