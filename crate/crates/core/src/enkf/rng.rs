//! Counter-addressed random streams: one independent ChaCha stream per
//! (seed, purpose, step, member), so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Purpose {
    Init = 1,
    Process = 2,
    Observation = 3,
    Synthetic = 4,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn member_rng(seed: u64, purpose: Purpose, step: u64, member: usize) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    let mut state = splitmix(seed) ^ splitmix((purpose as u64) << 56 ^ step);
    for chunk in key.chunks_exact_mut(8) {
        state = splitmix(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(member as u64);
    rng
}
