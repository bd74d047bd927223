//! Derivation of named random streams from a single root seed.
//!
//! Every consumer of randomness in this crate owns a stream keyed by
//! `(root seed, context words)`, where the context words identify a grid
//! cell, a replicate, a restart index, and the stream's role. Keys are
//! absorbed one at a time through the splitmix64 finalizer, which is
//! bijective and avalanche-complete, so distinct contexts yield
//! (effectively) independent ChaCha seeds and the whole experiment is a
//! pure function of the root seed.

/// Role tags keeping data, mask, and solver randomness apart even when the
/// remaining context words coincide.
pub(crate) const STREAM_DATA: u64 = 1;
pub(crate) const STREAM_MASK: u64 = 2;
pub(crate) const STREAM_SOLVER: u64 = 3;

/// splitmix64 finalizer (Vigna). One full avalanche round.
pub(crate) fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `words` into `root`, one splitmix64 round per word.
pub(crate) fn derive(root: u64, words: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for &w in words {
        state = splitmix64(state ^ splitmix64(w));
    }
    state
}
