//! Counter-based random streams.
//!
//! Every stream is a ChaCha12 keystream addressed by `(seed, purpose, index, sub)`:
//! the key holds `seed`, `sub` and a purpose tag, the 64-bit ChaCha stream id holds
//! `index`. Any draw can be reproduced in isolation, independent of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// Separates keystreams used for different jobs under the same user seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    /// fBm path coordinates: `index` = path index, `sub` = coordinate.
    Path,
    /// Random time quadruples / gap triples for bound sweeps: `index` = sample.
    Sampling,
}

impl Purpose {
    fn tag(self) -> &'static [u8; 16] {
        match self {
            Purpose::Path => b"fbmlab/path/v1\0\0",
            Purpose::Sampling => b"fbmlab/sample/v1",
        }
    }
}

pub fn stream(seed: u64, purpose: Purpose, index: u64, sub: u64) -> ChaCha12Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&sub.to_le_bytes());
    key[16..].copy_from_slice(purpose.tag());
    let mut rng = ChaCha12Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Stream for coordinate `coord` of path `path_index`.
pub fn path_stream(seed: u64, path_index: u64, coord: usize) -> ChaCha12Rng {
    stream(seed, Purpose::Path, path_index, coord as u64)
}
