//! Monte Carlo estimates of `E(AB)`, `E(A)` and `E(B)`.
//!
//! `n` draws are cut into fixed-size chunks; chunk `k` reads block `k` of
//! the caller's stream ([`RngSeed::substream`]). Since the chunking depends
//! only on `n`, callers may evaluate chunks in any order or on any number of
//! threads and merge the tallies to the same result.

use alloc::format;

use crate::error::{invalid, Result};
use crate::model::{JointLaw, LeggettModel, SettingsPair};
use crate::rng::RngSeed;

/// Draws per chunk.
pub const CHUNK_SAMPLES: u64 = 1 << 14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate {
    pub mean: f64,
    pub n: u64,
    pub se: f64,
}

impl CorrelationEstimate {
    /// From the sum of `n` values in `{−1, 1}`. The standard error is the
    /// exact `sqrt((1 − mean²)/n)` for that support.
    pub fn from_sum(sum: i64, n: u64) -> Result<Self> {
        if n == 0 {
            return Err(invalid("estimate needs at least one sample"));
        }
        if sum.unsigned_abs() > n {
            return Err(invalid(format!("sum {sum} impossible for {n} ±1 samples")));
        }
        let mean = sum as f64 / n as f64;
        let se = if sum.unsigned_abs() == n { 0.0 } else { libm::sqrt((1.0 - mean * mean) / n as f64) };
        Ok(Self { mean, n, se })
    }
}

/// Integer sums over a batch of runs; merging is exact and order-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Tally {
    pub n: u64,
    pub sum_a: i64,
    pub sum_b: i64,
    pub sum_ab: i64,
}

impl Tally {
    pub fn merge(self, other: Self) -> Self {
        Self {
            n: self.n + other.n,
            sum_a: self.sum_a + other.sum_a,
            sum_b: self.sum_b + other.sum_b,
            sum_ab: self.sum_ab + other.sum_ab,
        }
    }

    pub fn correlation(&self) -> Result<CorrelationEstimate> {
        CorrelationEstimate::from_sum(self.sum_ab, self.n)
    }

    pub fn marginals(&self) -> Result<(CorrelationEstimate, CorrelationEstimate)> {
        Ok((CorrelationEstimate::from_sum(self.sum_a, self.n)?, CorrelationEstimate::from_sum(self.sum_b, self.n)?))
    }
}

/// A model's per-atom joint laws for one settings pair, precomputed so the
/// sampling loop is a binary search and a comparison chain.
#[derive(Debug, Clone)]
pub struct SettingsView<'m> {
    model: &'m LeggettModel,
    laws: alloc::vec::Vec<JointLaw>,
}

impl<'m> SettingsView<'m> {
    pub fn new(model: &'m LeggettModel, s: &SettingsPair) -> Self {
        let laws = (0..model.distribution().len()).map(|i| model.atom_law(i, s)).collect();
        Self { model, laws }
    }

    /// `len` draws from block `chunk` of `seed`. Each draw consumes the same
    /// two uniforms as [`crate::model::sample_outcomes`].
    pub fn tally_chunk(&self, seed: RngSeed, chunk: u64, len: u64) -> Tally {
        use rand::Rng;
        let mut rng = seed.substream(chunk);
        let mut t = Tally { n: len, ..Tally::default() };
        for _ in 0..len {
            let index = self.model.atom_index(rng.random::<f64>());
            let o = self.laws[index].draw(rng.random::<f64>());
            t.sum_a += i64::from(o.alice);
            t.sum_b += i64::from(o.bob);
            t.sum_ab += i64::from(o.product());
        }
        t
    }
}

/// `(chunk index, draws in chunk)` for a run of `n` draws.
pub fn chunk_plan(n: u64) -> impl Iterator<Item = (u64, u64)> {
    let chunks = n.div_ceil(CHUNK_SAMPLES);
    (0..chunks).map(move |k| (k, CHUNK_SAMPLES.min(n - k * CHUNK_SAMPLES)))
}

/// Sequential tally of `n` draws; the parallel driver in the `leggett`
/// crate produces the same value.
pub fn run_tally(m: &LeggettModel, s: &SettingsPair, n: u64, seed: RngSeed) -> Result<Tally> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let view = SettingsView::new(m, s);
    Ok(chunk_plan(n).map(|(k, len)| view.tally_chunk(seed, k, len)).fold(Tally::default(), Tally::merge))
}

/// Mean of `A·B` over `n` simulated runs.
pub fn estimate_correlation(m: &LeggettModel, s: &SettingsPair, n: u64, seed: RngSeed) -> Result<CorrelationEstimate> {
    run_tally(m, s, n, seed)?.correlation()
}

/// Means of `A` and of `B` over `n` simulated runs (the same runs).
pub fn estimate_marginals(
    m: &LeggettModel,
    s: &SettingsPair,
    n: u64,
    seed: RngSeed,
) -> Result<(CorrelationEstimate, CorrelationEstimate)> {
    run_tally(m, s, n, seed)?.marginals()
}
