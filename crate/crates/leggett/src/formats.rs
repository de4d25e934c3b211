//! JSON file formats: models, target data, certification problems and
//! certificates.
//!
//! Vectors are `[x, y, z]` arrays. Vectors that claim to be unit must be so
//! within [`UNIT_TOL`] and are renormalized on load. Model weights are
//! renormalized when their sum is within [`WEIGHT_SUM_TOL`] of one and
//! rejected otherwise.

use std::fs;
use std::path::Path;

use leggett_core::certify::{
    build_problem, CandidateAtom, CertificationProblem, FarkasCertificate, FeasibilityCertificate, TargetConstraint,
    Verdict,
};
use leggett_core::model::{Atom, Coupling, LeggettModel, SettingsPair, SubensembleDistribution};
use leggett_core::sphere::UnitVector3;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::CliError;

pub const UNIT_TOL: f64 = 1e-6;
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

pub type Vec3 = [f64; 3];

pub fn unit(v: Vec3) -> Result<UnitVector3, leggett_core::Error> {
    UnitVector3::from_unit(v[0], v[1], v[2], UNIT_TOL)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomRecord {
    pub u: Vec3,
    pub v: Vec3,
    pub w: f64,
}

/// `{"atoms": [{"u": .., "v": .., "w": ..}], "coupling": "independent"}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub atoms: Vec<AtomRecord>,
    pub coupling: String,
}

impl ModelFile {
    pub fn from_model(m: &LeggettModel) -> Self {
        Self {
            atoms: m
                .distribution()
                .atoms()
                .iter()
                .map(|a| AtomRecord { u: a.u.to_array(), v: a.v.to_array(), w: a.weight })
                .collect(),
            coupling: m.coupling().name().to_owned(),
        }
    }

    pub fn to_model(&self) -> Result<LeggettModel, leggett_core::Error> {
        let coupling: Coupling = self.coupling.parse()?;
        let atoms = self
            .atoms
            .iter()
            .map(|r| Ok(Atom { u: unit(r.u)?, v: unit(r.v)?, weight: r.w }))
            .collect::<Result<Vec<_>, leggett_core::Error>>()?;
        let d = SubensembleDistribution::with_sum_tolerance(atoms, WEIGHT_SUM_TOL)?;
        Ok(LeggettModel::new(d, coupling))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettingsRecord {
    pub a: Vec3,
    pub b: Vec3,
}

impl SettingsRecord {
    pub fn from_pair(s: &SettingsPair) -> Self {
        Self { a: s.a.to_array(), b: s.b.to_array() }
    }

    pub fn to_pair(&self) -> Result<SettingsPair, leggett_core::Error> {
        Ok(SettingsPair::new(unit(self.a)?, unit(self.b)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintRecord {
    pub a: Vec3,
    pub b: Vec3,
    pub correlation: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub marginal_b: Option<f64>,
}

impl ConstraintRecord {
    pub fn from_target(t: &TargetConstraint) -> Self {
        Self {
            a: t.settings.a.to_array(),
            b: t.settings.b.to_array(),
            correlation: t.correlation,
            marginal_a: t.marginals.map(|m| m.0),
            marginal_b: t.marginals.map(|m| m.1),
        }
    }

    pub fn to_target(&self) -> Result<TargetConstraint, leggett_core::Error> {
        let marginals = match (self.marginal_a, self.marginal_b) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => {
                return Err(leggett_core::Error::InvalidArgument(
                    "marginal_a and marginal_b must be given together".into(),
                ))
            }
        };
        Ok(TargetConstraint {
            settings: SettingsPair::new(unit(self.a)?, unit(self.b)?),
            correlation: self.correlation,
            marginals,
        })
    }
}

/// Target data file: `{"constraints": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetsFile {
    pub constraints: Vec<ConstraintRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    pub u: Vec3,
    pub v: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub atoms: Vec<CandidateRecord>,
    pub constraints: Vec<ConstraintRecord>,
    pub include_marginals: bool,
}

impl ProblemFile {
    pub fn from_problem(p: &CertificationProblem) -> Self {
        Self {
            atoms: p.atoms().iter().map(|a| CandidateRecord { u: a.u.to_array(), v: a.v.to_array() }).collect(),
            constraints: p.constraints().iter().map(ConstraintRecord::from_target).collect(),
            include_marginals: p.include_marginals(),
        }
    }

    pub fn to_problem(&self) -> Result<CertificationProblem, leggett_core::Error> {
        let grid = self
            .atoms
            .iter()
            .map(|r| Ok(CandidateAtom { u: unit(r.u)?, v: unit(r.v)? }))
            .collect::<Result<Vec<_>, leggett_core::Error>>()?;
        let targets = self.constraints.iter().map(ConstraintRecord::to_target).collect::<Result<Vec<_>, _>>()?;
        build_problem(&grid, &targets, self.include_marginals)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarkasRecord {
    pub multipliers: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateFile {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    /// `"feasible"` or `"infeasible"`.
    pub status: String,
    /// 16 hex digits.
    pub grid_hash: String,
    pub atoms: usize,
    pub rows: usize,
    pub weights: Option<Vec<f64>>,
    pub farkas: Option<FarkasRecord>,
}

impl CertificateFile {
    pub fn new(
        c: &FeasibilityCertificate,
        p: &CertificationProblem,
        tool_version: String,
        seed: u64,
        config_hash: String,
    ) -> Self {
        let (weights, farkas) = match &c.verdict {
            Verdict::Feasible { weights } => (Some(weights.clone()), None),
            Verdict::Infeasible(f) => {
                (None, Some(FarkasRecord { multipliers: f.multipliers.clone(), margin: f.margin }))
            }
        };
        Self {
            tool_version,
            seed,
            config_hash,
            status: c.status().to_owned(),
            grid_hash: format!("{:016x}", c.grid_hash),
            atoms: p.atoms().len(),
            rows: p.rows().len(),
            weights,
            farkas,
        }
    }

    pub fn to_certificate(&self) -> Result<FeasibilityCertificate, leggett_core::Error> {
        let bad = |m: &str| leggett_core::Error::InvalidArgument(m.to_owned());
        let grid_hash = u64::from_str_radix(&self.grid_hash, 16).map_err(|_| bad("grid_hash is not hex"))?;
        let verdict = match (self.status.as_str(), &self.weights, &self.farkas) {
            ("feasible", Some(w), None) => Verdict::Feasible { weights: w.clone() },
            ("infeasible", None, Some(f)) => {
                Verdict::Infeasible(FarkasCertificate { multipliers: f.multipliers.clone(), margin: f.margin })
            }
            _ => return Err(bad("status must be 'feasible' with weights or 'infeasible' with farkas")),
        };
        Ok(FeasibilityCertificate { grid_hash, verdict })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::load(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::load(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io { path: path.to_owned(), source })
}

pub fn load_model(path: &Path) -> Result<LeggettModel, CliError> {
    read_json::<ModelFile>(path)?.to_model().map_err(|e| CliError::load(path, e))
}

pub fn load_targets(path: &Path) -> Result<Vec<TargetConstraint>, CliError> {
    read_json::<TargetsFile>(path)?
        .constraints
        .iter()
        .map(|c| c.to_target().map_err(|e| CliError::load(path, e)))
        .collect()
}

pub fn load_problem(path: &Path) -> Result<CertificationProblem, CliError> {
    read_json::<ProblemFile>(path)?.to_problem().map_err(|e| CliError::load(path, e))
}

pub fn load_certificate(path: &Path) -> Result<FeasibilityCertificate, CliError> {
    read_json::<CertificateFile>(path)?.to_certificate().map_err(|e| CliError::load(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use leggett_core::certify::search::{SettingsFamily, ThreePlane};
    use leggett_core::certify::{singlet_targets, solve, standard_grid, verify_certificate};

    #[test]
    fn model_weights_renormalize_within_tolerance_only() {
        let rec = |w| AtomRecord { u: [1.0, 0.0, 0.0], v: [0.0, 1.0, 0.0], w };
        let ok = ModelFile { atoms: vec![rec(0.5), rec(0.5 + 5e-10)], coupling: "independent".into() };
        let m = ok.to_model().unwrap();
        let total: f64 = m.distribution().atoms().iter().map(|a| a.weight).sum();
        assert!((total - 1.0).abs() <= 1e-12);
        let bad = ModelFile { atoms: vec![rec(0.5), rec(0.6)], coupling: "independent".into() };
        assert!(bad.to_model().is_err());
        let bad = ModelFile { atoms: vec![rec(1.0)], coupling: "sideways".into() };
        assert!(bad.to_model().is_err());
        let not_unit = ModelFile {
            atoms: vec![AtomRecord { u: [2.0, 0.0, 0.0], v: [0.0, 1.0, 0.0], w: 1.0 }],
            coupling: "independent".into(),
        };
        assert!(not_unit.to_model().is_err());
    }

    #[test]
    fn unknown_model_keys_are_rejected() {
        let text = r#"{"atoms": [{"u": [1,0,0], "v": [0,1,0], "w": 1, "x": 2}], "coupling": "independent"}"#;
        assert!(serde_json::from_str::<ModelFile>(text).is_err());
    }

    #[test]
    fn model_json_layout() {
        let text = r#"{"atoms": [{"u": [0,0,1], "v": [0,0,-1], "w": 1.0}], "coupling": "comonotone"}"#;
        let m = serde_json::from_str::<ModelFile>(text).unwrap().to_model().unwrap();
        assert_eq!(m.coupling(), Coupling::Comonotone);
        assert_eq!(m.distribution().atoms()[0].v, -UnitVector3::Z);
    }

    #[test]
    fn problem_and_certificate_survive_a_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = ThreePlane.settings(&[1.0, 1.0, 1.0, 1.5, 1.5, 1.5]);
        let p = build_problem(&standard_grid(120).unwrap(), &singlet_targets(&pairs), true).unwrap();
        let c = solve(&p).unwrap();

        let pp = dir.path().join("problem.json");
        let cp = dir.path().join("cert.json");
        write_text(&pp, &to_json(&ProblemFile::from_problem(&p))).unwrap();
        write_text(&cp, &to_json(&CertificateFile::new(&c, &p, "t".into(), 1, "h".into()))).unwrap();

        let p2 = load_problem(&pp).unwrap();
        let c2 = load_certificate(&cp).unwrap();
        assert_eq!(p2.grid_hash(), p.grid_hash());
        assert_eq!(c2, c);
        assert!(verify_certificate(&p2, &c2).unwrap());
    }

    #[test]
    fn certificate_status_must_match_payload() {
        let f = CertificateFile {
            tool_version: "t".into(),
            seed: 0,
            config_hash: "h".into(),
            status: "feasible".into(),
            grid_hash: "00000000000000ff".into(),
            atoms: 1,
            rows: 2,
            weights: None,
            farkas: Some(FarkasRecord { multipliers: vec![1.0], margin: 0.1 }),
        };
        assert!(f.to_certificate().is_err());
    }

    #[test]
    fn constraint_marginals_must_be_paired() {
        let c = ConstraintRecord {
            a: [1.0, 0.0, 0.0],
            b: [1.0, 0.0, 0.0],
            correlation: 0.0,
            marginal_a: Some(0.0),
            marginal_b: None,
        };
        assert!(c.to_target().is_err());
    }
}
