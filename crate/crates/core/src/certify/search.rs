//! Searching settings families for certified violations.
//!
//! A [`SettingsFamily`] maps a parameter vector to a list of settings pairs.
//! [`pattern_search`] maximizes a black-box objective over a box with
//! random restarts and shrinking coordinate polls; [`optimize_settings`]
//! wires it to the certified infeasibility margin of singlet targets.

use alloc::boxed::Box;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;

use super::{build_problem, singlet_targets, solve, CandidateAtom};
use crate::error::{invalid, Result};
use crate::model::SettingsPair;
use crate::rng::RngSeed;
use crate::sphere::{Rotation, UnitVector3};

pub trait SettingsFamily: Send + Sync {
    fn name(&self) -> &'static str;

    /// Box constraints `(low, high)` for each parameter.
    fn parameter_bounds(&self) -> Vec<(f64, f64)>;

    fn settings(&self, params: &[f64]) -> Vec<SettingsPair>;
}

/// One pair from two sets of spherical angles `(θa, φa, θb, φb)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SinglePair;

impl SettingsFamily for SinglePair {
    fn name(&self) -> &'static str {
        "single-pair"
    }

    fn parameter_bounds(&self) -> Vec<(f64, f64)> {
        alloc::vec![(0.0, PI), (0.0, 2.0 * PI), (0.0, PI), (0.0, 2.0 * PI)]
    }

    fn settings(&self, p: &[f64]) -> Vec<SettingsPair> {
        alloc::vec![SettingsPair::new(UnitVector3::from_spherical(p[0], p[1]), UnitVector3::from_spherical(p[2], p[3]))]
    }
}

/// CHSH pairs `(a,b), (a,b′), (a′,b), (a′,b′)` with all four settings on
/// one great circle, parameterized by azimuths.
#[derive(Debug, Clone, Copy, Default)]
pub struct PlanarChsh;

impl SettingsFamily for PlanarChsh {
    fn name(&self) -> &'static str {
        "chsh-planar"
    }

    fn parameter_bounds(&self) -> Vec<(f64, f64)> {
        alloc::vec![(0.0, 2.0 * PI); 4]
    }

    fn settings(&self, p: &[f64]) -> Vec<SettingsPair> {
        crate::quantum::ChshScenario::planar(p[0], p[1], p[2], p[3]).pairs().to_vec()
    }
}

/// Alice measures along each coordinate axis `e_k`; for each one Bob
/// measures at `±φ_k/2` from it, tilted toward a direction in the plane
/// orthogonal to `e_k` chosen by the azimuth `ψ_k`. Six pairs in three
/// distinct planes, parameters `(φ_1, φ_2, φ_3, ψ_1, ψ_2, ψ_3)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct ThreePlane;

impl SettingsFamily for ThreePlane {
    fn name(&self) -> &'static str {
        "three-plane"
    }

    fn parameter_bounds(&self) -> Vec<(f64, f64)> {
        let mut b = alloc::vec![(0.0, PI); 3];
        b.extend([(-PI, PI); 3]);
        b
    }

    fn settings(&self, p: &[f64]) -> Vec<SettingsPair> {
        let axes = [UnitVector3::X, UnitVector3::Y, UnitVector3::Z];
        let mut pairs = Vec::with_capacity(6);
        for k in 0..3 {
            let a = axes[k];
            let (e1, e2) = (axes[(k + 1) % 3], axes[(k + 2) % 3]);
            let tilt = Rotation::from_axis_angle(&a, p[3 + k]).apply(&e1);
            let axis = a.cross(&tilt).unwrap_or(e2);
            for sign in [1.0, -1.0] {
                let b = Rotation::from_axis_angle(&axis, sign * p[k] / 2.0).apply(&a);
                pairs.push(SettingsPair::new(a, b));
            }
        }
        pairs
    }
}

pub fn family_by_name(name: &str) -> Option<Box<dyn SettingsFamily>> {
    match name {
        "single-pair" => Some(Box::new(SinglePair)),
        "chsh-planar" => Some(Box::new(PlanarChsh)),
        "three-plane" => Some(Box::new(ThreePlane)),
        _ => None,
    }
}

pub const FAMILY_NAMES: [&str; 3] = ["single-pair", "chsh-planar", "three-plane"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Initial poll step as a fraction of each parameter's range.
    pub initial_step: f64,
    /// A restart ends once the step falls below this fraction.
    pub min_step: f64,
    pub shrink: f64,
}

impl SearchConfig {
    pub fn with_budget(budget: usize) -> Self {
        Self { budget, initial_step: 0.25, min_step: 1e-3, shrink: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub params: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub restarts: usize,
}

/// Maximizes an objective over the box `bounds`.
///
/// `evaluate` receives batches of points (a restart's start point, then the
/// `±step` poll around the incumbent) and returns one value per point; the
/// batch form lets callers fan out. Each poll moves to its best strictly
/// improving point (lowest index on ties) or halves the step.
pub fn pattern_search<F>(
    bounds: &[(f64, f64)],
    config: &SearchConfig,
    seed: RngSeed,
    mut evaluate: F,
) -> Result<SearchResult>
where
    F: FnMut(&[Vec<f64>]) -> Vec<f64>,
{
    if config.budget == 0 {
        return Err(invalid("search budget must be positive"));
    }
    if bounds.is_empty() || bounds.iter().any(|(lo, hi)| !(lo < hi)) {
        return Err(invalid("search box must have positive extent in every coordinate"));
    }
    let mut rng = seed.stream();
    let mut evaluations = 0usize;
    let mut restarts = 0usize;
    let mut best: Option<(Vec<f64>, f64)> = None;

    while evaluations < config.budget {
        restarts += 1;
        let start: Vec<f64> = bounds.iter().map(|&(lo, hi)| rng.random_range(lo..hi)).collect();
        let mut value = evaluate(core::slice::from_ref(&start))[0];
        evaluations += 1;
        let mut current = start;
        let mut step = config.initial_step;

        while evaluations < config.budget && step >= config.min_step {
            let mut poll = Vec::with_capacity(2 * bounds.len());
            for (k, &(lo, hi)) in bounds.iter().enumerate() {
                for sign in [1.0, -1.0] {
                    let mut p = current.clone();
                    p[k] = (p[k] + sign * step * (hi - lo)).clamp(lo, hi);
                    if p[k] != current[k] {
                        poll.push(p);
                    }
                }
            }
            poll.truncate(config.budget - evaluations);
            let values = evaluate(&poll);
            evaluations += poll.len();
            let mut chosen: Option<usize> = None;
            for (i, &v) in values.iter().enumerate() {
                let incumbent = chosen.map_or(value, |c| values[c]);
                if v > incumbent + 1e-12 {
                    chosen = Some(i);
                }
            }
            match chosen {
                Some(i) => {
                    value = values[i];
                    current = poll.swap_remove(i);
                }
                None => step *= config.shrink,
            }
        }
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((current, value));
        }
    }
    let (params, value) = best.expect("budget > 0 guarantees one restart");
    Ok(SearchResult { params, value, evaluations, restarts })
}

/// Certified margin of singlet targets for `family(params)` on `grid`;
/// zero when feasible, `−∞` on solver failure so the search never selects
/// it.
pub fn singlet_margin(
    family: &dyn SettingsFamily,
    grid: &[CandidateAtom],
    include_marginals: bool,
    params: &[f64],
) -> f64 {
    let targets = singlet_targets(&family.settings(params));
    build_problem(grid, &targets, include_marginals).and_then(|p| solve(&p)).map_or(f64::NEG_INFINITY, |c| c.margin())
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedFamily {
    pub params: Vec<f64>,
    pub settings: Vec<SettingsPair>,
    pub margin: f64,
    pub evaluations: usize,
    pub restarts: usize,
}

/// Sequential driver: searches `family` for the largest certified
/// infeasibility margin against singlet targets.
pub fn optimize_settings(
    family: &dyn SettingsFamily,
    grid: &[CandidateAtom],
    include_marginals: bool,
    config: &SearchConfig,
    seed: RngSeed,
) -> Result<OptimizedFamily> {
    let r = pattern_search(&family.parameter_bounds(), config, seed, |batch| {
        batch.iter().map(|p| singlet_margin(family, grid, include_marginals, p)).collect()
    })?;
    Ok(OptimizedFamily {
        settings: family.settings(&r.params),
        params: r.params,
        margin: r.value,
        evaluations: r.evaluations,
        restarts: r.restarts,
    })
}
