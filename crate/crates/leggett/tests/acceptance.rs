//! Acceptance suite. Runs every criterion in sequence, prints one line per
//! criterion and exits nonzero if any fails.

use std::path::Path;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use leggett::config::ExperimentConfig;
use leggett::{commands, parallel, ExitStatus};
use leggett_core::bounds::{averaged_bounds, conditional_bounds, pointwise_identity, ROUNDING_SLACK};
use leggett_core::certify::{
    build_problem, singlet_targets, solve, standard_grid, verify_certificate, CandidateAtom, TargetConstraint,
};
use leggett_core::model::{
    conditional_marginals, exact_model_correlation, exact_model_marginals, joint_conditional_law, Coupling,
    LeggettModel, OutcomePair, SettingsPair, SubensembleDistribution,
};
use leggett_core::quantum::{chsh_value, singlet_correlation, ChshScenario, CHSH_CLASSICAL_BOUND, TSIRELSON_BOUND};
use leggett_core::rng::{RngSeed, Stream};
use leggett_core::sphere::{random_unit_vector, UnitVector3};
use rand::Rng;

const CHSH_TOL: f64 = 1e-9;
const K_SIGMA: f64 = 4.0;
const MC_SAMPLES: u64 = 100_000;
const MC_REQUIRED: usize = 99;
const MIN_FARKAS_MARGIN: f64 = 0.5;
const GRID: usize = 500;
const CHECK_GRID: usize = 2000;
const STABILITY: f64 = 0.2;
const OPTIMIZER_SEED: u64 = 0;
const OPTIMIZER_BUDGET: usize = 2000;
const PINNED_MARGIN: f64 = 0.08452112181096903;
const PINNED_TOL: f64 = 1e-6;

struct Outcome {
    ok: bool,
    detail: String,
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn rng(stream: u64) -> Stream {
    RngSeed::new(20_240_501, stream).stream()
}

fn random_settings(r: &mut Stream) -> SettingsPair {
    SettingsPair::new(random_unit_vector(r), random_unit_vector(r))
}

/// A model drawn from a mix of generators, sizes and couplings.
fn random_model(r: &mut Stream) -> LeggettModel {
    let coupling = Coupling::ALL[r.random_range(0..3)];
    let atoms = r.random_range(1..40);
    let d = match r.random_range(0..4) {
        0 => SubensembleDistribution::isotropic_random(atoms, r).unwrap(),
        1 => SubensembleDistribution::mirrored_random(atoms, r).unwrap(),
        2 => SubensembleDistribution::point_mass(random_unit_vector(r), random_unit_vector(r)),
        _ => {
            let p = SubensembleDistribution::isotropic_random(atoms, r).unwrap();
            let q = SubensembleDistribution::point_mass(random_unit_vector(r), random_unit_vector(r));
            SubensembleDistribution::mixture(&p, &q, r.random_range(0.05..0.95)).unwrap()
        }
    };
    LeggettModel::new(d, coupling)
}

fn identity() -> Outcome {
    let exact = OutcomePair::ALL.iter().all(|&o| {
        let t = pointwise_identity(o).unwrap();
        t.lhs == t.mid && t.mid == t.rhs && t.mid == f64::from(o.product())
    });
    let cmd = commands::identity_check(&ExperimentConfig::default()).unwrap();
    let ok = exact && cmd.status == ExitStatus::Success;
    outcome(ok, format!("4 outcome pairs, exact equality {exact}, command exit {}", cmd.status.code()))
}

fn conditional() -> Outcome {
    let mut r = rng(2);
    let mut violations = 0usize;
    let mut checks = 0usize;
    for _ in 0..10_000 {
        let (u, v) = (random_unit_vector(&mut r), random_unit_vector(&mut r));
        let s = random_settings(&mut r);
        let b = conditional_bounds(&u, &v, &s);
        let (pa, pb) = conditional_marginals(&u, &v, &s);
        for c in Coupling::ALL {
            let e = joint_conditional_law(pa, pb, c).unwrap().correlation();
            checks += 1;
            violations += usize::from(!b.contains(e, ROUNDING_SLACK));
        }
    }
    outcome(violations == 0, format!("{checks} checks, {violations} violations"))
}

fn averaged() -> Outcome {
    let mut r = rng(3);
    let mut violations = 0usize;
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let m = random_model(&mut r);
        for _ in 0..100 {
            let s = random_settings(&mut r);
            let b = averaged_bounds(m.distribution(), &s).unwrap();
            let e = exact_model_correlation(&m, &s);
            worst = worst.min((e - b.lower).min(b.upper - e));
            violations += usize::from(!b.contains(e, ROUNDING_SLACK));
        }
    }
    outcome(violations == 0, format!("20 models x 100 settings, {violations} violations, smallest margin {worst:e}"))
}

fn monte_carlo() -> Outcome {
    let mut r = rng(4);
    let mut within = 0usize;
    let mut worst = 0.0f64;
    for i in 0..100u64 {
        let m = random_model(&mut r);
        let s = random_settings(&mut r);
        let est = parallel::estimate_correlation(&m, &s, MC_SAMPLES, RngSeed::new(i, 0)).unwrap();
        let z = (est.mean - exact_model_correlation(&m, &s)).abs() / est.se.max(f64::MIN_POSITIVE);
        worst = worst.max(z);
        within += usize::from(z <= K_SIGMA);
    }
    outcome(
        within >= MC_REQUIRED,
        format!("{within}/100 within {K_SIGMA} se at n = {MC_SAMPLES}, largest |z| {worst:.2}"),
    )
}

fn chsh() -> Outcome {
    let mut r = rng(5);
    let mut max_s = 0.0f64;
    for _ in 0..10_000 {
        let mut m = random_model(&mut r);
        m = LeggettModel::new(m.distribution().clone(), Coupling::Independent);
        let sc = ChshScenario::random(&mut r);
        max_s = max_s.max(chsh_value(&sc, |s| exact_model_correlation(&m, s)).abs());
    }
    let singlet = chsh_value(&ChshScenario::standard(), singlet_correlation);
    let ok = max_s <= CHSH_CLASSICAL_BOUND + CHSH_TOL && (singlet.abs() - TSIRELSON_BOUND).abs() <= CHSH_TOL;
    outcome(ok, format!("separable max |S| = {max_s:.12} over 10^4 scenarios, singlet |S| = {:.12}", singlet.abs()))
}

fn certification() -> Outcome {
    let mut r = rng(6);
    let (mut verified, mut infeasible) = (0usize, 0usize);
    for _ in 0..200 {
        let grid: Vec<CandidateAtom> = if r.random_bool(0.5) {
            standard_grid(r.random_range(1..200)).unwrap()
        } else {
            (0..r.random_range(1..60))
                .map(|_| CandidateAtom { u: random_unit_vector(&mut r), v: random_unit_vector(&mut r) })
                .collect()
        };
        let pairs: Vec<SettingsPair> = (0..r.random_range(1..7)).map(|_| random_settings(&mut r)).collect();
        let targets: Vec<TargetConstraint> = match r.random_range(0..3) {
            0 => singlet_targets(&pairs),
            1 => {
                let m = random_model(&mut r);
                pairs
                    .iter()
                    .map(|s| TargetConstraint {
                        settings: *s,
                        correlation: exact_model_correlation(&m, s),
                        marginals: Some(exact_model_marginals(&m, s)),
                    })
                    .collect()
            }
            _ => pairs
                .iter()
                .map(|s| TargetConstraint {
                    settings: *s,
                    correlation: r.random_range(-1.0..=1.0),
                    marginals: Some((r.random_range(-1.0..=1.0), r.random_range(-1.0..=1.0))),
                })
                .collect(),
        };
        let p = build_problem(&grid, &targets, r.random_bool(0.5)).unwrap();
        let c = solve(&p).unwrap();
        infeasible += usize::from(!c.is_feasible());
        verified += usize::from(verify_certificate(&p, &c).unwrap());
    }

    let (x, y) = (UnitVector3::X, UnitVector3::Y);
    let p = build_problem(
        &[CandidateAtom { u: x, v: x }, CandidateAtom { u: y, v: y }],
        &[
            TargetConstraint { settings: SettingsPair::new(x, x), correlation: -0.5, marginals: None },
            TargetConstraint { settings: SettingsPair::new(y, y), correlation: -0.5, marginals: None },
        ],
        false,
    )
    .unwrap();
    let c = solve(&p).unwrap();
    let small_ok = !c.is_feasible() && c.margin() >= MIN_FARKAS_MARGIN && verify_certificate(&p, &c).unwrap();
    outcome(
        verified == 200 && small_ok,
        format!(
            "{verified}/200 certificates verify ({infeasible} infeasible), 2-atom system {} with margin {}",
            c.status(),
            c.margin()
        ),
    )
}

fn witness() -> Outcome {
    let cfg = ExperimentConfig {
        seed: OPTIMIZER_SEED,
        grid: Some(GRID),
        check_grid: Some(CHECK_GRID),
        budget: Some(OPTIMIZER_BUDGET),
        family: Some("three-plane".into()),
        ..ExperimentConfig::default()
    };
    let out = commands::optimize(&cfg).unwrap();
    let report: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let margin = report["margin"].as_f64().unwrap();
    let check = report["check_margin"].as_f64().unwrap();
    let rel = report["relative_difference"].as_f64().unwrap();
    let ok = report["status"] == "infeasible"
        && margin > 0.0
        && check > 0.0
        && rel <= STABILITY
        && (margin - PINNED_MARGIN).abs() <= PINNED_TOL;
    outcome(
        ok,
        format!(
            "three-plane margin {margin} on {GRID} atoms, {check} on {CHECK_GRID} atoms, relative difference {rel:.4}, pinned {PINNED_MARGIN}"
        ),
    )
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    std::fs::write(
        &config,
        r#"{"seed": 11, "samples": 100000,
            "model": {"generator": "isotropic", "atoms": 200, "coupling": "comonotone"},
            "settings": {"random": 20}}"#,
    )
    .unwrap();
    let run = |out: &Path| {
        Command::new(env!("CARGO_BIN_EXE_leggett"))
            .args(["simulate", "--config"])
            .arg(&config)
            .arg("--output")
            .arg(out)
            .stdout(Stdio::null())
            .status()
            .unwrap()
    };
    let (first, second) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let (s1, s2) = (run(&first), run(&second));
    let (a, b) = (std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    let ok = s1.success() && s2.success() && !a.is_empty() && a == b && !a.contains(&b'\r');
    outcome(ok, format!("two runs, {} bytes each, identical {}", a.len(), a == b))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("pointwise identity", identity, Duration::from_millis(1)),
        ("conditional bounds", conditional, Duration::from_secs(1)),
        ("averaged bounds", averaged, Duration::from_secs(10)),
        ("monte carlo vs exact", monte_carlo, Duration::from_secs(60)),
        ("chsh", chsh, Duration::from_secs(10)),
        ("certification soundness", certification, Duration::from_secs(30)),
        ("violation witness", witness, Duration::from_secs(600)),
        ("reproducibility", reproducibility, Duration::from_secs(5)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        let elapsed = start.elapsed();
        let pass = o.ok && elapsed <= *limit;
        failed += usize::from(!pass);
        println!(
            "[{}] {}. {name}: {} ({elapsed:.2?}, limit {limit:?})",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
