use leggett::parallel;
use leggett_core::certify::search::{optimize_settings, SearchConfig, ThreePlane};
use leggett_core::certify::standard_grid;
use leggett_core::estimate::{estimate_correlation, estimate_marginals, run_tally, CHUNK_SAMPLES};
use leggett_core::model::{Coupling, LeggettModel, SettingsPair, SubensembleDistribution};
use leggett_core::rng::RngSeed;
use leggett_core::sphere::random_unit_vector;

fn model(coupling: Coupling, seed: u64) -> LeggettModel {
    let mut r = RngSeed::new(seed, 99).stream();
    LeggettModel::new(SubensembleDistribution::isotropic_random(25, &mut r).unwrap(), coupling)
}

#[test]
fn parallel_tallies_match_sequential_bit_for_bit() {
    let mut r = RngSeed::new(5, 5).stream();
    for (i, n) in
        [1, 17, CHUNK_SAMPLES - 1, CHUNK_SAMPLES, CHUNK_SAMPLES + 1, 5 * CHUNK_SAMPLES + 123].into_iter().enumerate()
    {
        for c in Coupling::ALL {
            let m = model(c, i as u64);
            let s = SettingsPair::new(random_unit_vector(&mut r), random_unit_vector(&mut r));
            let seed = RngSeed::new(i as u64, 3);
            assert_eq!(parallel::run_tally(&m, &s, n, seed).unwrap(), run_tally(&m, &s, n, seed).unwrap());
            assert_eq!(
                parallel::estimate_correlation(&m, &s, n, seed).unwrap(),
                estimate_correlation(&m, &s, n, seed).unwrap()
            );
            assert_eq!(
                parallel::estimate_marginals(&m, &s, n, seed).unwrap(),
                estimate_marginals(&m, &s, n, seed).unwrap()
            );
        }
    }
}

#[test]
fn zero_samples_are_rejected() {
    let m = model(Coupling::Independent, 0);
    let s = SettingsPair::new(
        random_unit_vector(&mut RngSeed::default().stream()),
        random_unit_vector(&mut RngSeed::default().stream()),
    );
    assert!(parallel::run_tally(&m, &s, 0, RngSeed::default()).is_err());
}

#[test]
fn parallel_optimizer_follows_the_sequential_trajectory() {
    let grid = standard_grid(120).unwrap();
    let config = SearchConfig::with_budget(150);
    let seed = RngSeed::new(4, 1);
    let a = parallel::optimize_settings(&ThreePlane, &grid, true, &config, seed).unwrap();
    let b = optimize_settings(&ThreePlane, &grid, true, &config, seed).unwrap();
    assert_eq!(a, b);
}
