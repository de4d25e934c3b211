//! Seeded, splittable random streams.
//!
//! A stream is ChaCha12 keyed by `seed` with the ChaCha stream number set to
//! `stream_id`. ChaCha is counter-based, so a stream can also be entered at
//! any word offset; [`RngSeed::substream`] uses that to carve one stream into
//! disjoint blocks for chunked Monte Carlo.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type Stream = ChaCha12Rng;

/// Each substream block spans 2^36 words, far more than a chunk consumes.
const SUBSTREAM_SHIFT: u32 = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct RngSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngSeed {
    pub const fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub const fn with_stream(self, stream_id: u64) -> Self {
        Self { seed: self.seed, stream_id }
    }

    pub fn stream(&self) -> Stream {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Block `index` of this stream. Blocks never overlap as long as each
    /// consumes fewer than 2^36 32-bit words.
    pub fn substream(&self, index: u64) -> Stream {
        let mut rng = self.stream();
        rng.set_word_pos(u128::from(index) << SUBSTREAM_SHIFT);
        rng
    }
}
