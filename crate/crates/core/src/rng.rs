//! Seeded, splittable random streams.
//!
//! Every random draw in the crate goes through a [`SimRng`]. Child streams are
//! keyed by `(master, trial, lane)`: the three words are packed directly into the
//! ChaCha key, so two different key triples never share a stream and a trial's
//! draws do not depend on which thread ran it or in what order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Lane used for channel realisations.
pub const LANE_CHANNEL: u64 = 1;
/// Lane used for beam-pair soundings (training and exhaustive baseline).
pub const LANE_SOUNDING: u64 = 2;
/// Lane used for model initialisation.
pub const LANE_LEARN: u64 = 3;
/// Lane used for random subsampling of the codebooks.
pub const LANE_SUBSAMPLE: u64 = 4;
/// Lane used for the one-shot exhaustive-search baseline.
pub const LANE_EXHAUSTIVE: u64 = 5;

pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

pub fn child_rng(master: u64, trial: u64, lane: u64) -> SimRng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&lane.to_le_bytes());
    // Tag the last word so child keys never coincide with `seed_from_u64` output patterns.
    key[24..].copy_from_slice(b"beamkm\x00\x01");
    SimRng::from_seed(key)
}
