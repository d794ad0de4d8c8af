//! Deterministic seed derivation.
//!
//! Every stochastic quantity in a run draws from its own stream so that
//! enabling or reordering one impairment never shifts the noise another one
//! sees. Streams are derived from (base seed, stream id, run index) and are
//! bit-stable across platforms and thread schedules.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Stream ids, one per random quantity.
pub mod stream {
    pub const DATA_BITS: u64 = 1;
    pub const PILOTS: u64 = 2;
    pub const PREAMBLE: u64 = 3;
    pub const PATH_PHASE: u64 = 4;
    pub const AWGN: u64 = 5;
    pub const PHASE_NOISE_TX: u64 = 6;
    pub const PHASE_NOISE_RX: u64 = 7;
    pub const JITTER_DAC: u64 = 8;
    pub const JITTER_ADC: u64 = 9;
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// ChaCha stream for (base seed, stream id), run 0.
pub fn derive_rng(base_seed: u64, stream_id: u64) -> ChaCha12Rng {
    derive_run_rng(base_seed, stream_id, 0)
}

/// ChaCha stream for one Monte-Carlo run of one random quantity.
pub fn derive_run_rng(base_seed: u64, stream_id: u64, run: u64) -> ChaCha12Rng {
    let mut state = base_seed ^ 0x6a09e667f3bcc908;
    let mut key = [0u8; 32];
    let words = [
        splitmix64(&mut state) ^ stream_id.rotate_left(17),
        splitmix64(&mut state) ^ run.rotate_left(31),
        splitmix64(&mut state).wrapping_add(stream_id),
        splitmix64(&mut state).wrapping_add(run),
    ];
    for (i, w) in words.iter().enumerate() {
        key[i * 8..(i + 1) * 8].copy_from_slice(&w.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Stateless 2-bit draw for a grid position, used for pilot values.
pub fn position_bits(seed: u64, n: usize, m: usize) -> (bool, bool) {
    let mut state = seed
        ^ (n as u64).wrapping_mul(0x9e3779b97f4a7c15)
        ^ (m as u64).wrapping_mul(0xc2b2ae3d27d4eb4f);
    let v = splitmix64(&mut state);
    (v & 1 != 0, v & 2 != 0)
}
