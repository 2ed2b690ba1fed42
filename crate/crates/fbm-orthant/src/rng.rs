//! Seed and stream discipline for reproducible parallel Monte Carlo.
//!
//! Every stochastic routine derives its generators from a user seed plus a
//! `(domain, batch)` pair via ChaCha12's independent stream mechanism. Work
//! is split into fixed-size batches, batch `j` always uses stream
//! `(domain, j)` regardless of which worker thread processes it, and
//! reductions run in batch order — so output is bit-identical across thread
//! counts.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Samples per RNG batch. Fixed: batch boundaries are part of the
/// reproducibility contract, so this is not tunable at run time.
pub const BATCH_SIZE: usize = 256;

/// Independent stream namespaces, one per stochastic subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Path synthesis for the direct probability estimator.
    Montecarlo = 1,
    /// Path synthesis for the Pickands-constant estimator.
    Pickands = 2,
    /// Stand-alone path generation (CLI path dumps, covariance tests).
    PathDump = 3,
}

/// Generator for batch `batch` of `domain`, derived from the user seed.
///
/// Streams are independent ChaCha12 keystreams: same seed ⇒ same sequence
/// per `(domain, batch)`, distinct sequences across pairs.
pub fn batch_rng(seed: u64, domain: StreamDomain, batch: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) ^ batch);
    rng
}

/// Number of batches needed for `n` samples.
pub fn batch_count(n: usize) -> usize {
    n.div_ceil(BATCH_SIZE)
}

/// Sample index range of batch `j` when drawing `n` samples in total.
pub fn batch_range(n: usize, j: usize) -> std::ops::Range<usize> {
    let start = j * BATCH_SIZE;
    start..((start + BATCH_SIZE).min(n))
}
