//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream addressed by `(seed, purpose)` for the
//! key and the replica index for the stream id, so the numbers a replica
//! sees do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Distinct consumers of randomness within one campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    MuBarStart = 1,
    UniformStart = 2,
    HorizonProbe = 3,
    MeanTau = 4,
    Sigma2 = 5,
    Bootstrap = 6,
    Llt = 7,
    Decorrelation = 8,
    AlmostSure = 9,
    Invariants = 10,
    Test = 0xfeed,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `replica` under `(seed, purpose)`.
pub fn stream(seed: u64, purpose: Purpose, replica: u64) -> StreamRng {
    let mut state = seed ^ (purpose as u64).rotate_left(32);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replica);
    rng
}
