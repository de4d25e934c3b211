//! Rayon drivers. Each produces exactly the value of its sequential
//! counterpart in `leggett_core`: work is split along the same chunk plan or
//! poll batch, and tallies are integers, so reduction order is irrelevant.

use leggett_core::certify::search::{pattern_search, singlet_margin, OptimizedFamily, SearchConfig, SettingsFamily};
use leggett_core::certify::CandidateAtom;
use leggett_core::estimate::{chunk_plan, CorrelationEstimate, SettingsView, Tally};
use leggett_core::model::{LeggettModel, SettingsPair};
use leggett_core::rng::RngSeed;
use leggett_core::Result;
use rayon::prelude::*;

pub fn run_tally(m: &LeggettModel, s: &SettingsPair, n: u64, seed: RngSeed) -> Result<Tally> {
    if n == 0 {
        return Err(leggett_core::Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let view = SettingsView::new(m, s);
    let plan: Vec<(u64, u64)> = chunk_plan(n).collect();
    Ok(plan.par_iter().map(|&(k, len)| view.tally_chunk(seed, k, len)).reduce(Tally::default, Tally::merge))
}

pub fn estimate_correlation(m: &LeggettModel, s: &SettingsPair, n: u64, seed: RngSeed) -> Result<CorrelationEstimate> {
    run_tally(m, s, n, seed)?.correlation()
}

pub fn estimate_marginals(
    m: &LeggettModel,
    s: &SettingsPair,
    n: u64,
    seed: RngSeed,
) -> Result<(CorrelationEstimate, CorrelationEstimate)> {
    run_tally(m, s, n, seed)?.marginals()
}

/// Parallel poll evaluation; same trajectory as
/// [`leggett_core::certify::search::optimize_settings`].
pub fn optimize_settings(
    family: &dyn SettingsFamily,
    grid: &[CandidateAtom],
    include_marginals: bool,
    config: &SearchConfig,
    seed: RngSeed,
) -> Result<OptimizedFamily> {
    let r = pattern_search(&family.parameter_bounds(), config, seed, |batch| {
        batch.par_iter().map(|p| singlet_margin(family, grid, include_marginals, p)).collect()
    })?;
    Ok(OptimizedFamily {
        settings: family.settings(&r.params),
        params: r.params,
        margin: r.value,
        evaluations: r.evaluations,
        restarts: r.restarts,
    })
}
