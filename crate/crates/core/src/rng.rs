//! Deterministic RNG stream splitting.
//!
//! Every random draw in the crate comes from a ChaCha12 stream keyed by
//! `(master seed, domain tag, up to five u32 indices)` packed into the
//! 32-byte ChaCha key:
//!
//! ```text
//! bytes  0..8   master seed (LE u64)
//! byte   8      domain tag
//! bytes  9..12  index count
//! bytes 12..32  indices (LE u32 each)
//! ```
//!
//! Distinct `(domain, indices)` tuples therefore get provably distinct,
//! independent streams, so Monte Carlo results are schedule-independent:
//! trial `k` reads stream `(seed, domain, [k])` no matter which thread runs
//! it, and a lazily sampled tree-code node reads the stream keyed by its
//! path, which makes lazy and eager codebook sampling bit-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Domain tags keeping unrelated consumers on disjoint streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Tree-codebook node sampling, indexed by node path.
    CodebookNode = 1,
    /// Monte Carlo trials of the simulation harness, indexed by trial.
    Trial = 2,
    /// Reference draws for typicality-threshold estimation, indexed by (t, draw).
    ThresholdEstimate = 3,
    /// Typical-set membership estimates, indexed by trial.
    Typicality = 4,
    /// Test-instance generation.
    Instance = 5,
}

/// The ChaCha12 stream for `(seed, domain, indices)`. Panics if more than
/// five indices are supplied.
pub fn stream(seed: u64, domain: StreamDomain, indices: &[u32]) -> ChaCha12Rng {
    assert!(indices.len() <= 5, "stream key holds at most 5 indices");
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8] = domain as u8;
    key[9..12].copy_from_slice(&(indices.len() as u32).to_le_bytes()[..3]);
    for (i, &ix) in indices.iter().enumerate() {
        key[12 + 4 * i..16 + 4 * i].copy_from_slice(&ix.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}
