//! Counter-based randomness.
//!
//! Every random quantity in the crate is a pure function of a master seed and a
//! tuple of counters, so results never depend on how work is split across
//! threads. Two flavours are used:
//!
//! * [`stream`] hands out a sequential generator keyed by a counter tuple, used
//!   where one logical sample consumes an unknown number of draws (RR-sets,
//!   graph generation).
//! * [`coin`] / [`unit`] give random access to a single uniform draw keyed by a
//!   tuple. Monte-Carlo worlds use these so that the outcome of arc `a` in run
//!   `r` is the same no matter which cascade visits it first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Sequential generator used for one logical sample.
pub type Stream = ChaCha8Rng;

// Domain tags keep the different uses of the mixer apart.
pub(crate) const TAG_RR: u64 = 0x5252_5345_5453;
pub(crate) const TAG_RRC: u64 = 0x5252_4353_4554;
pub(crate) const TAG_PILOT: u64 = 0x5049_4c4f_5400;
pub(crate) const TAG_WORLD: u64 = 0x574f_524c_4400;
pub(crate) const TAG_ARC: u64 = 0x4152_4300;
pub(crate) const TAG_SEED: u64 = 0x5345_4544;
pub(crate) const TAG_CTP: u64 = 0x4354_5000;
pub(crate) const TAG_GEN: u64 = 0x4745_4e00;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Folds a counter tuple into a single 64-bit key.
#[inline]
pub fn key(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6a09_e667_f3bc_c908, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Uniform draw in `[0, 1)` addressed by `parts`.
#[inline]
pub fn unit(parts: &[u64]) -> f64 {
    to_unit(key(parts))
}

#[inline]
pub(crate) fn to_unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Bernoulli(`p`) outcome addressed by `parts`.
#[inline]
pub fn coin(p: f64, parts: &[u64]) -> bool {
    unit(parts) < p
}

/// A fresh sequential stream addressed by `parts`.
pub fn stream(parts: &[u64]) -> Stream {
    Stream::seed_from_u64(key(parts))
}
