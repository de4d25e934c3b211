//! Run configuration: one JSON document, unknown keys rejected.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "samples": 100000,
//!   "model": { "generator": "isotropic", "atoms": 1000, "coupling": "independent" },
//!   "settings": { "random": 50 },
//!   "output": "sim.csv"
//! }
//! ```
//!
//! Command-line flags override the matching keys. The effective
//! configuration is hashed into every output.

use std::path::{Path, PathBuf};

use leggett_core::bounds::DEFAULT_K_SIGMA;
use leggett_core::certify::search::family_by_name;
use leggett_core::model::{Coupling, LeggettModel, SettingsPair, SubensembleDistribution};
use leggett_core::quantum::ChshScenario;
use leggett_core::rng::RngSeed;
use leggett_core::sphere::random_unit_vector;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::formats::{self, unit, SettingsRecord, Vec3};

pub const DEFAULT_SAMPLES: u64 = 100_000;
pub const DEFAULT_GRID: usize = 500;
pub const DEFAULT_BUDGET: usize = 10_000;
pub const DEFAULT_SCENARIOS: usize = 1_000;
pub const DEFAULT_FAMILY: &str = "three-plane";

// Stream ids reserved for configuration-time randomness. Simulation rows use
// their row index as the stream id.
const MODEL_STREAM: u64 = u64::MAX;
const SETTINGS_STREAM: u64 = u64::MAX - 1;
const SCENARIO_STREAM: u64 = u64::MAX - 2;
const SEARCH_STREAM: u64 = u64::MAX - 3;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix of `experiment_id` in tabular output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Second grid size for the optimizer's stability check; `4 × grid` if
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check_grid: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_sigma: Option<f64>,
    #[serde(default)]
    pub include_marginals: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Where `certify` also writes the problem it solved.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem_output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settings: Option<SettingsSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub targets: Option<TargetsSource>,
    /// A saved certification problem; replaces grid, settings and targets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<PathBuf>,
    /// Certificate checked by `verify`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSettings>,
    /// Number of random CHSH scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<usize>,
}

/// Either `{"file": ..}` or `{"generator": .., ..}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    /// `point-mass`, `isotropic`, `isotropic-grid`, `mirrored` or
    /// `mirrored-grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<String>,
}

/// Exactly one of `pairs`, `random` or `family` (with `params`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairs: Option<Vec<SettingsRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum TargetsSource {
    Singlet,
    Model,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSettings {
    pub a: Vec3,
    pub a_prime: Vec3,
    pub b: Vec3,
    pub b_prime: Vec3,
}

impl ScenarioSettings {
    pub fn to_scenario(&self) -> Result<ChshScenario, leggett_core::Error> {
        Ok(ChshScenario {
            a: unit(self.a)?,
            a_prime: unit(self.a_prime)?,
            b: unit(self.b)?,
            b_prime: unit(self.b_prime)?,
        })
    }
}

/// Values from the command line that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub samples: Option<u64>,
    pub grid: Option<usize>,
    pub k_sigma: Option<f64>,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config(e.to_string()))
    }

    /// Reads a configuration; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::load(path, e))?;
        let mut c = Self::parse(&text).map_err(|e| CliError::load(path, e))?;
        if let Some(base) = path.parent() {
            c.resolve_paths(base);
        }
        Ok(c)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.output.as_mut().map(fix);
        self.problem_output.as_mut().map(fix);
        self.problem.as_mut().map(fix);
        self.certificate.as_mut().map(fix);
        if let Some(ModelSource { file: Some(f), .. }) = self.model.as_mut() {
            fix(f);
        }
        if let Some(TargetsSource::File(f)) = self.targets.as_mut() {
            fix(f);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if o.output.is_some() {
            self.output.clone_from(&o.output);
        }
        if o.samples.is_some() {
            self.samples = o.samples;
        }
        if o.grid.is_some() {
            self.grid = o.grid;
        }
        if o.k_sigma.is_some() {
            self.k_sigma = o.k_sigma;
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    /// Output destinations are left out, so reruns into different files
    /// share a hash.
    pub fn hash(&self) -> String {
        let inputs = Self { output: None, problem_output: None, ..self.clone() };
        let canonical = serde_json::to_vec(&inputs).expect("plain data serializes");
        let digest = Sha256::digest(&canonical);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn seed(&self, stream_id: u64) -> RngSeed {
        RngSeed::new(self.seed, stream_id)
    }

    pub fn samples(&self) -> Result<u64, CliError> {
        match self.samples.unwrap_or(DEFAULT_SAMPLES) {
            0 => Err(CliError::config("samples must be positive")),
            n => Ok(n),
        }
    }

    pub fn grid(&self) -> Result<usize, CliError> {
        match self.grid.unwrap_or(DEFAULT_GRID) {
            0 => Err(CliError::config("grid must be positive")),
            n => Ok(n),
        }
    }

    pub fn check_grid(&self) -> Result<usize, CliError> {
        let g = self.grid()?;
        match self.check_grid.unwrap_or(4 * g) {
            0 => Err(CliError::config("check_grid must be positive")),
            n => Ok(n),
        }
    }

    pub fn k_sigma(&self) -> Result<f64, CliError> {
        let k = self.k_sigma.unwrap_or(DEFAULT_K_SIGMA);
        if k.is_finite() && k >= 0.0 {
            Ok(k)
        } else {
            Err(CliError::config(format!("k_sigma must be a nonnegative number, got {k}")))
        }
    }

    pub fn budget(&self) -> Result<usize, CliError> {
        match self.budget.unwrap_or(DEFAULT_BUDGET) {
            0 => Err(CliError::config("budget must be positive")),
            n => Ok(n),
        }
    }

    pub fn search_seed(&self) -> RngSeed {
        self.seed(SEARCH_STREAM)
    }

    pub fn model(&self) -> Result<LeggettModel, CliError> {
        let source = self.model.as_ref().ok_or_else(|| CliError::config("this command needs a model"))?;
        source.build(self.seed(MODEL_STREAM))
    }

    pub fn settings(&self) -> Result<Vec<SettingsPair>, CliError> {
        let source = self.settings.as_ref().ok_or_else(|| CliError::config("this command needs settings"))?;
        source.build(self.seed(SETTINGS_STREAM))
    }

    pub fn random_scenarios(&self) -> Vec<ChshScenario> {
        let mut rng = self.seed(SCENARIO_STREAM).stream();
        (0..self.scenarios.unwrap_or(DEFAULT_SCENARIOS)).map(|_| ChshScenario::random(&mut rng)).collect()
    }
}

impl ModelSource {
    pub fn build(&self, seed: RngSeed) -> Result<LeggettModel, CliError> {
        let core = |e: leggett_core::Error| CliError::config(format!("model: {e}"));
        match (&self.file, &self.generator) {
            (Some(path), None) => {
                if self.atoms.is_some() || self.u.is_some() || self.v.is_some() || self.coupling.is_some() {
                    return Err(CliError::config("model: a model file takes no other keys"));
                }
                formats::load_model(path)
            }
            (None, Some(g)) => {
                let coupling: Coupling = self.coupling.as_deref().unwrap_or("independent").parse().map_err(core)?;
                let atoms =
                    || self.atoms.ok_or_else(|| CliError::config(format!("model: generator '{g}' needs atoms")));
                let mut rng = seed.stream();
                let d = match g.as_str() {
                    "point-mass" => {
                        let (Some(u), Some(v)) = (self.u, self.v) else {
                            return Err(CliError::config("model: point-mass needs u and v"));
                        };
                        SubensembleDistribution::point_mass(unit(u).map_err(core)?, unit(v).map_err(core)?)
                    }
                    "isotropic" => SubensembleDistribution::isotropic_random(atoms()?, &mut rng).map_err(core)?,
                    "isotropic-grid" => {
                        let side = (atoms()? as f64).sqrt().ceil() as usize;
                        SubensembleDistribution::isotropic_grid(side, side).map_err(core)?
                    }
                    "mirrored" => SubensembleDistribution::mirrored_random(atoms()?, &mut rng).map_err(core)?,
                    "mirrored-grid" => SubensembleDistribution::mirrored_grid(atoms()?).map_err(core)?,
                    other => return Err(CliError::config(format!("model: unknown generator '{other}'"))),
                };
                Ok(LeggettModel::new(d, coupling))
            }
            _ => Err(CliError::config("model: give exactly one of 'file' and 'generator'")),
        }
    }
}

impl SettingsSource {
    pub fn build(&self, seed: RngSeed) -> Result<Vec<SettingsPair>, CliError> {
        let core = |e: leggett_core::Error| CliError::config(format!("settings: {e}"));
        match (&self.pairs, self.random, &self.family) {
            (Some(pairs), None, None) if self.params.is_none() => {
                pairs.iter().map(|p| p.to_pair().map_err(core)).collect()
            }
            (None, Some(n), None) if self.params.is_none() => {
                let mut rng = seed.stream();
                Ok((0..n)
                    .map(|_| SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng)))
                    .collect())
            }
            (None, None, Some(name)) => {
                let family = family_by_name(name)
                    .ok_or_else(|| CliError::config(format!("settings: unknown family '{name}'")))?;
                let params = self.params.as_ref().ok_or_else(|| CliError::config("settings: family needs params"))?;
                let bounds = family.parameter_bounds();
                if params.len() != bounds.len() || params.iter().any(|p| !p.is_finite()) {
                    return Err(CliError::config(format!(
                        "settings: family '{name}' needs {} finite params",
                        bounds.len()
                    )));
                }
                Ok(family.settings(params))
            }
            _ => Err(CliError::config("settings: give exactly one of 'pairs', 'random' and 'family'")),
        }
    }
}
