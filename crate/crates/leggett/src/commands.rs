//! Subcommand implementations. Each returns the text for standard output
//! and an exit status; files named by the configuration are written here.

use std::path::Path;

use leggett_core::bounds::{averaged_bounds, check_bounds, pointwise_identity, IdentityTerms, ROUNDING_SLACK};
use leggett_core::certify::search::{family_by_name, singlet_margin, SearchConfig};
use leggett_core::certify::{
    build_problem, singlet_targets, solve, standard_grid, verify_certificate, CertificationProblem, TargetConstraint,
};
use leggett_core::model::{
    exact_model_correlation, exact_model_marginals, Coupling, LeggettModel, OutcomePair, SettingsPair,
};
use leggett_core::quantum::{chsh_value, singlet_correlation, ChshScenario, CHSH_CLASSICAL_BOUND, TSIRELSON_BOUND};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, TargetsSource, DEFAULT_FAMILY};
use crate::error::CliError;
use crate::formats::{self, CertificateFile, ProblemFile, SettingsRecord, Vec3};
use crate::parallel;
use crate::tool_version;

/// Slack for exact CHSH comparisons against the classical bound.
pub const CHSH_EXACT_SLACK: f64 = 1e-9;

/// Relative disagreement between the two grid resolutions that still counts
/// as a stable optimizer margin.
pub const STABILITY_TOLERANCE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    VerdictFailure = 1,
    ConfigError = 2,
    SolverFailure = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    fn from_ok(ok: bool) -> Self {
        if ok {
            Self::Success
        } else {
            Self::VerdictFailure
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub stdout: String,
    pub status: ExitStatus,
}

#[derive(Debug, Clone, Serialize)]
struct Provenance {
    tool_version: String,
    seed: u64,
    config_hash: String,
}

impl Provenance {
    fn of(cfg: &ExperimentConfig) -> Self {
        Self { tool_version: tool_version(), seed: cfg.seed, config_hash: cfg.hash() }
    }
}

/// Writes `text` to the configured output file, or returns it for stdout.
fn emit(cfg: &ExperimentConfig, text: String, summary: String, status: ExitStatus) -> Result<CommandOutput, CliError> {
    match &cfg.output {
        Some(path) => {
            formats::write_text(path, &text)?;
            Ok(CommandOutput { stdout: format!("{summary}\nwrote {}\n", path.display()), status })
        }
        None => Ok(CommandOutput { stdout: text, status }),
    }
}

fn experiment_id(cfg: &ExperimentConfig, index: usize) -> String {
    format!("{}-{index:05}", cfg.label.as_deref().unwrap_or("exp"))
}

// ---------------------------------------------------------------- identity

#[derive(Serialize)]
struct IdentityCase {
    alice: i8,
    bob: i8,
    lhs: f64,
    mid: f64,
    rhs: f64,
    holds: bool,
}

#[derive(Serialize)]
struct IdentityReport {
    #[serde(flatten)]
    provenance: Provenance,
    cases: Vec<IdentityCase>,
    verdict: &'static str,
}

pub fn identity_check(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    identity_check_with(cfg, pointwise_identity)
}

/// Runs the identity check with a replaceable evaluator, so tests can
/// confirm that a broken implementation is caught.
pub fn identity_check_with<F>(cfg: &ExperimentConfig, evaluate: F) -> Result<CommandOutput, CliError>
where
    F: Fn(OutcomePair) -> leggett_core::Result<IdentityTerms>,
{
    let mut cases = Vec::with_capacity(4);
    for o in OutcomePair::ALL {
        let t = evaluate(o)?;
        cases.push(IdentityCase { alice: o.alice, bob: o.bob, lhs: t.lhs, mid: t.mid, rhs: t.rhs, holds: t.holds() });
    }
    let ok = cases.iter().all(|c| c.holds);
    let failed = cases.iter().filter(|c| !c.holds).count();
    let report =
        IdentityReport { provenance: Provenance::of(cfg), cases, verdict: if ok { "holds" } else { "violated" } };
    let summary = format!("identity {}: {failed} of 4 outcome pairs failed", report.verdict);
    emit(cfg, formats::to_json(&report), summary, ExitStatus::from_ok(ok))
}

// ---------------------------------------------------------------- simulate

const SIMULATE_HEADER: [&str; 18] = [
    "experiment_id",
    "ax",
    "ay",
    "az",
    "bx",
    "by",
    "bz",
    "n",
    "mean",
    "se",
    "exact",
    "lower",
    "upper",
    "margin",
    "verdict",
    "tool_version",
    "seed",
    "config_hash",
];

struct SimulateRow {
    id: String,
    s: SettingsPair,
    n: u64,
    mean: f64,
    se: f64,
    exact: f64,
    lower: f64,
    upper: f64,
    margin: f64,
    satisfied: bool,
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new())
}

fn csv_finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv output is utf-8")
}

fn vec_fields(v: Vec3) -> [String; 3] {
    v.map(|c| c.to_string())
}

/// Monte Carlo estimate of `E(a,b)` for each settings pair, with averaged
/// bounds and a `k·se` verdict. Row `i` draws from stream `i`.
pub fn simulate(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let settings = cfg.settings()?;
    let n = cfg.samples()?;
    let k = cfg.k_sigma()?;

    let rows = settings
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let est = parallel::estimate_correlation(&model, s, n, cfg.seed(i as u64))?;
            let b = averaged_bounds(model.distribution(), s)?;
            let v = check_bounds(est.mean, est.se, &b, k)?;
            Ok(SimulateRow {
                id: experiment_id(cfg, i),
                s: *s,
                n,
                mean: est.mean,
                se: est.se,
                exact: exact_model_correlation(&model, s),
                lower: b.lower,
                upper: b.upper,
                margin: v.margin,
                satisfied: v.satisfied,
            })
        })
        .collect::<Result<Vec<_>, leggett_core::Error>>()?;

    let prov = Provenance::of(cfg);
    let mut w = csv_writer();
    w.write_record(SIMULATE_HEADER).expect("in-memory write");
    for r in &rows {
        let mut rec: Vec<String> = vec![r.id.clone()];
        rec.extend(vec_fields(r.s.a.to_array()));
        rec.extend(vec_fields(r.s.b.to_array()));
        rec.extend([
            r.n.to_string(),
            r.mean.to_string(),
            r.se.to_string(),
            r.exact.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.margin.to_string(),
            (if r.satisfied { "satisfied" } else { "violated" }).to_owned(),
            prov.tool_version.clone(),
            prov.seed.to_string(),
            prov.config_hash.clone(),
        ]);
        w.write_record(&rec).expect("in-memory write");
    }
    let violated = rows.iter().filter(|r| !r.satisfied).count();
    let summary = format!("simulate: {} settings, {violated} outside bounds at k = {k}", rows.len());
    emit(cfg, csv_finish(w), summary, ExitStatus::from_ok(violated == 0))
}

// ---------------------------------------------------------------- bounds

const BOUNDS_HEADER: [&str; 17] = [
    "experiment_id",
    "ax",
    "ay",
    "az",
    "bx",
    "by",
    "bz",
    "lower",
    "upper",
    "exact",
    "exact_inside",
    "singlet",
    "singlet_margin",
    "singlet_verdict",
    "tool_version",
    "seed",
    "config_hash",
];

/// Averaged bounds of the model for each settings pair, the model's exact
/// correlation (which must lie inside) and the singlet value (which may
/// not).
pub fn bounds(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let model = cfg.model()?;
    let settings = cfg.settings()?;
    let prov = Provenance::of(cfg);
    let mut w = csv_writer();
    w.write_record(BOUNDS_HEADER).expect("in-memory write");
    let (mut broken, mut outside) = (0usize, 0usize);
    for (i, s) in settings.iter().enumerate() {
        let b = averaged_bounds(model.distribution(), s)?;
        let exact = exact_model_correlation(&model, s);
        let inside = b.contains(exact, ROUNDING_SLACK);
        let q = singlet_correlation(s);
        let q_margin = (q - b.lower).min(b.upper - q);
        broken += usize::from(!inside);
        outside += usize::from(q_margin < 0.0);
        let mut rec: Vec<String> = vec![experiment_id(cfg, i)];
        rec.extend(vec_fields(s.a.to_array()));
        rec.extend(vec_fields(s.b.to_array()));
        rec.extend([
            b.lower.to_string(),
            b.upper.to_string(),
            exact.to_string(),
            inside.to_string(),
            q.to_string(),
            q_margin.to_string(),
            (if q_margin >= 0.0 { "inside" } else { "outside" }).to_owned(),
            prov.tool_version.clone(),
            prov.seed.to_string(),
            prov.config_hash.clone(),
        ]);
        w.write_record(&rec).expect("in-memory write");
    }
    let summary = format!(
        "bounds: {} settings, model outside its own bounds {broken} times, singlet outside {outside} times",
        settings.len()
    );
    emit(cfg, csv_finish(w), summary, ExitStatus::from_ok(broken == 0))
}

// ---------------------------------------------------------------- chsh

#[derive(Serialize)]
struct ScenarioRecord {
    a: Vec3,
    a_prime: Vec3,
    b: Vec3,
    b_prime: Vec3,
}

impl ScenarioRecord {
    fn of(sc: &ChshScenario) -> Self {
        Self { a: sc.a.to_array(), a_prime: sc.a_prime.to_array(), b: sc.b.to_array(), b_prime: sc.b_prime.to_array() }
    }
}

#[derive(Serialize)]
struct ModelChsh {
    coupling: &'static str,
    exact: f64,
    estimate: f64,
    se: f64,
    samples: u64,
}

#[derive(Serialize)]
struct RandomChsh {
    count: usize,
    max_abs_singlet: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_model_exact: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_abs_model_estimate: Option<f64>,
    /// Scenarios whose estimate exceeds `2 + k·se`.
    #[serde(skip_serializing_if = "Option::is_none")]
    exceedances: Option<usize>,
}

#[derive(Serialize)]
struct ChshReport {
    #[serde(flatten)]
    provenance: Provenance,
    classical_bound: f64,
    tsirelson_bound: f64,
    k_sigma: f64,
    scenario: ScenarioRecord,
    singlet: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<ModelChsh>,
    random: RandomChsh,
    /// Only independent-coupling models are local; other couplings are
    /// reported without a verdict.
    verdict: &'static str,
}

/// `S` estimate and standard error; the four terms use distinct streams
/// starting at `first_stream`.
fn chsh_estimate(
    model: &LeggettModel,
    sc: &ChshScenario,
    n: u64,
    cfg: &ExperimentConfig,
    first_stream: u64,
) -> leggett_core::Result<(f64, f64)> {
    let mut terms = [(0.0, 0.0); 4];
    for (j, s) in sc.pairs().iter().enumerate() {
        let e = parallel::estimate_correlation(model, s, n, cfg.seed(first_stream + j as u64))?;
        terms[j] = (e.mean, e.se);
    }
    let s = terms[0].0 + terms[1].0 + terms[2].0 - terms[3].0;
    let se = terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
    Ok((s, se))
}

/// CHSH values for the singlet and, if configured, a model: one chosen
/// scenario (the standard one by default) plus a batch of random ones.
pub fn chsh(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let k = cfg.k_sigma()?;
    let sc = match &cfg.scenario {
        Some(source) => source.to_scenario().map_err(|e| CliError::config(format!("scenario: {e}")))?,
        None => ChshScenario::standard(),
    };
    let random = cfg.random_scenarios();
    let singlet = chsh_value(&sc, singlet_correlation);
    let max_abs_singlet = random.iter().map(|r| chsh_value(r, singlet_correlation).abs()).fold(0.0, f64::max);

    let (model_part, random_part, ok) = match &cfg.model {
        None => (
            None,
            RandomChsh {
                count: random.len(),
                max_abs_singlet,
                max_abs_model_exact: None,
                max_abs_model_estimate: None,
                exceedances: None,
            },
            true,
        ),
        Some(_) => {
            let model = cfg.model()?;
            let n = cfg.samples()?;
            let exact = chsh_value(&sc, |s| exact_model_correlation(&model, s));
            let (estimate, se) = chsh_estimate(&model, &sc, n, cfg, 0)?;
            let exacts: Vec<f64> =
                random.iter().map(|r| chsh_value(r, |s| exact_model_correlation(&model, s))).collect();
            let estimates = random
                .par_iter()
                .enumerate()
                .map(|(i, r)| chsh_estimate(&model, r, n, cfg, 4 + 4 * i as u64))
                .collect::<Result<Vec<_>, _>>()?;
            let exceedances = estimates.iter().filter(|(s, se)| s.abs() > CHSH_CLASSICAL_BOUND + k * se).count();
            let max_exact = exacts.iter().map(|s| s.abs()).fold(exact.abs(), f64::max);
            let ok = model.coupling() != Coupling::Independent
                || (max_exact <= CHSH_CLASSICAL_BOUND + CHSH_EXACT_SLACK && exceedances == 0);
            (
                Some(ModelChsh { coupling: model.coupling().name(), exact, estimate, se, samples: n }),
                RandomChsh {
                    count: random.len(),
                    max_abs_singlet,
                    max_abs_model_exact: Some(exacts.iter().map(|s| s.abs()).fold(0.0, f64::max)),
                    max_abs_model_estimate: Some(estimates.iter().map(|s| s.0.abs()).fold(0.0, f64::max)),
                    exceedances: Some(exceedances),
                },
                ok,
            )
        }
    };
    let verdict = match &model_part {
        Some(m) if m.coupling == Coupling::Independent.name() => {
            if ok {
                "local bound respected"
            } else {
                "local bound violated"
            }
        }
        Some(_) => "no local bound applies",
        None => "singlet only",
    };
    let report = ChshReport {
        provenance: Provenance::of(cfg),
        classical_bound: CHSH_CLASSICAL_BOUND,
        tsirelson_bound: TSIRELSON_BOUND,
        k_sigma: k,
        scenario: ScenarioRecord::of(&sc),
        singlet,
        model: model_part,
        random: random_part,
        verdict,
    };
    let summary = format!("chsh: singlet S = {singlet}, {verdict}");
    emit(cfg, formats::to_json(&report), summary, ExitStatus::from_ok(ok))
}

// ---------------------------------------------------------------- certify

/// The certification problem described by the configuration: a saved
/// problem file, or the standard grid with targets for the settings.
pub fn certification_problem(cfg: &ExperimentConfig) -> Result<CertificationProblem, CliError> {
    if let Some(path) = &cfg.problem {
        if cfg.settings.is_some() || cfg.targets.is_some() || cfg.grid.is_some() {
            return Err(CliError::config("a problem file replaces grid, settings and targets"));
        }
        return formats::load_problem(path);
    }
    let targets: Vec<TargetConstraint> = match cfg.targets.as_ref().unwrap_or(&TargetsSource::Singlet) {
        TargetsSource::Singlet => singlet_targets(&cfg.settings()?),
        TargetsSource::Model => {
            let model = cfg.model()?;
            cfg.settings()?
                .iter()
                .map(|s| TargetConstraint {
                    settings: *s,
                    correlation: exact_model_correlation(&model, s),
                    marginals: Some(exact_model_marginals(&model, s)),
                })
                .collect()
        }
        TargetsSource::File(path) => {
            if cfg.settings.is_some() {
                return Err(CliError::config("a targets file already fixes the settings"));
            }
            formats::load_targets(path)?
        }
    };
    let grid = standard_grid(cfg.grid()?)?;
    Ok(build_problem(&grid, &targets, cfg.include_marginals)?)
}

pub fn certify(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let problem = certification_problem(cfg)?;
    if let Some(path) = &cfg.problem_output {
        formats::write_text(path, &formats::to_json(&ProblemFile::from_problem(&problem)))?;
    }
    let cert = solve(&problem)?;
    let verified = verify_certificate(&problem, &cert)?;
    let file = CertificateFile::new(&cert, &problem, tool_version(), cfg.seed, cfg.hash());
    let summary = format!(
        "certify: {} on {} atoms and {} rows, margin {}, verified {verified}",
        cert.status(),
        problem.atoms().len(),
        problem.rows().len(),
        cert.margin()
    );
    emit(cfg, formats::to_json(&file), summary, ExitStatus::from_ok(verified))
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(flatten)]
    provenance: Provenance,
    status: &'static str,
    margin: f64,
    verified: bool,
}

/// Independently re-checks a saved certificate against a saved problem.
pub fn verify(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let (Some(pp), Some(cp)) = (&cfg.problem, &cfg.certificate) else {
        return Err(CliError::config("verify needs 'problem' and 'certificate'"));
    };
    let problem = formats::load_problem(pp)?;
    let cert = formats::load_certificate(cp)?;
    let verified = verify_certificate(&problem, &cert)?;
    let report =
        VerifyReport { provenance: Provenance::of(cfg), status: cert.status(), margin: cert.margin(), verified };
    let summary = format!("verify: {} certificate {}", cert.status(), if verified { "holds" } else { "rejected" });
    emit(cfg, formats::to_json(&report), summary, ExitStatus::from_ok(verified))
}

// ---------------------------------------------------------------- optimize

#[derive(Serialize)]
struct OptimizeReport {
    #[serde(flatten)]
    provenance: Provenance,
    family: String,
    include_marginals: bool,
    budget: usize,
    evaluations: usize,
    restarts: usize,
    params: Vec<f64>,
    settings: Vec<SettingsRecord>,
    grid: usize,
    margin: f64,
    check_grid: usize,
    check_margin: f64,
    relative_difference: f64,
    status: &'static str,
    stable: bool,
}

/// Searches a settings family for the largest certified infeasibility
/// margin against singlet targets, then re-certifies the best settings on
/// a finer grid.
pub fn optimize(cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    let name = cfg.family.as_deref().unwrap_or(DEFAULT_FAMILY);
    let family = family_by_name(name).ok_or_else(|| CliError::config(format!("unknown family '{name}'")))?;
    let (g, g_check) = (cfg.grid()?, cfg.check_grid()?);
    let budget = cfg.budget()?;
    let grid = standard_grid(g)?;
    let best = parallel::optimize_settings(
        family.as_ref(),
        &grid,
        cfg.include_marginals,
        &SearchConfig::with_budget(budget),
        cfg.search_seed(),
    )?;
    if !best.margin.is_finite() {
        return Err(leggett_core::Error::SolverFailure("no search point could be certified".into()).into());
    }
    let check_margin = singlet_margin(family.as_ref(), &standard_grid(g_check)?, cfg.include_marginals, &best.params);
    if !check_margin.is_finite() {
        return Err(leggett_core::Error::SolverFailure("re-certification on the check grid failed".into()).into());
    }
    let scale = best.margin.abs().max(check_margin.abs());
    let relative_difference = if scale > 0.0 { (best.margin - check_margin).abs() / scale } else { 0.0 };
    let infeasible = best.margin > 0.0 && check_margin > 0.0;
    let report = OptimizeReport {
        provenance: Provenance::of(cfg),
        family: name.to_owned(),
        include_marginals: cfg.include_marginals,
        budget,
        evaluations: best.evaluations,
        restarts: best.restarts,
        params: best.params.clone(),
        settings: best.settings.iter().map(SettingsRecord::from_pair).collect(),
        grid: g,
        margin: best.margin,
        check_grid: g_check,
        check_margin,
        relative_difference,
        status: if infeasible { "infeasible" } else { "feasible" },
        stable: infeasible && relative_difference <= STABILITY_TOLERANCE,
    };
    let summary = format!("optimize: {name} margin {} on {g} atoms, {check_margin} on {g_check} atoms", best.margin);
    emit(cfg, formats::to_json(&report), summary, ExitStatus::Success)
}

/// Looks up a subcommand by name.
pub fn run(name: &str, cfg: &ExperimentConfig) -> Result<CommandOutput, CliError> {
    match name {
        "identity-check" => identity_check(cfg),
        "simulate" => simulate(cfg),
        "bounds" => bounds(cfg),
        "chsh" => chsh(cfg),
        "certify" => certify(cfg),
        "verify" => verify(cfg),
        "optimize" => optimize(cfg),
        other => Err(CliError::config(format!("unknown command '{other}'"))),
    }
}

/// Loads the configuration (if any), applies overrides and runs `name`.
pub fn run_with(
    name: &str,
    config: Option<&Path>,
    overrides: &crate::config::Overrides,
) -> Result<CommandOutput, CliError> {
    let mut cfg = match config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(overrides);
    run(name, &cfg)
}
