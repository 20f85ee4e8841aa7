//! Counter-keyed random streams: one independent stream per trial.
//!
//! A trial's stream depends only on `(seed, setting_index, trial_index)`, so
//! the assignment of trials to worker threads cannot change any result.

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;

pub type TrialRng = SplitMix64;

const SEED_SALT: u64 = 0x5357_5045_7374_726d;
const SETTING_MUL: u64 = 0x9E37_79B9_7F4A_7C15;
const TRIAL_MUL: u64 = 0xD1B5_4A32_D192_ED03;

/// SplitMix64 output finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
pub fn stream_key(seed: u64, setting_index: u64, trial_index: u64) -> u64 {
    let h = mix64(seed ^ SEED_SALT);
    let h = mix64(h ^ setting_index.wrapping_mul(SETTING_MUL));
    mix64(h ^ trial_index.wrapping_mul(TRIAL_MUL))
}

#[inline]
pub fn trial_stream(seed: u64, setting_index: u64, trial_index: u64) -> TrialRng {
    TrialRng::seed_from_u64(stream_key(seed, setting_index, trial_index))
}

/// Seed for an independent sub-run (one sweep point, one figure panel).
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    stream_key(seed, u64::MAX, label)
}
