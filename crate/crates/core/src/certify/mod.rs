//! Feasibility of target correlations for models on a finite atom grid.
//!
//! For every settings pair `j` with target correlation `E_j`, any
//! distribution `w` over candidate atoms `(u_i, v_i)` must satisfy
//!
//! ```text
//! Σ_i w_i |u_i·a_j + v_i·b_j| ≤ 1 + E_j
//! Σ_i w_i |u_i·a_j − v_i·b_j| ≤ 1 − E_j
//! ```
//!
//! and, when marginal targets are enabled, `Σ w_i u_i·a_j = mA_j` and
//! `Σ w_i v_i·b_j = mB_j` (each written as two inequality rows).
//!
//! [`solve`] computes the smallest uniform relaxation `δ ≥ 0` of every row
//! that admits a distribution. `δ = 0` yields a witness; `δ > 0` yields a
//! Farkas vector `y ≥ 0` with `Σ y = 1` such that for every atom `i`,
//! `(Gᵀy)_i − hᵀy ≥ δ`. Averaging that over any `w` shows some row is
//! violated by at least `δ`, which is the certificate's margin.

pub mod search;
pub mod simplex;

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::model::{Atom, SettingsPair, SubensembleDistribution};
use crate::quantum::{singlet_correlation, singlet_marginals};
use crate::sphere::{sphere_grid, UnitVector3};
use simplex::{LinearProgram, LpOutcome};

/// Row satisfaction tolerance for witnesses. A problem counts as feasible
/// when the optimal `δ` is at most half of it, leaving room for rounding
/// when the witness is re-checked.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// A candidate support point `(u, v)` for `P_uv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateAtom {
    pub u: UnitVector3,
    pub v: UnitVector3,
}

/// Every pairing of an `n_u`-point lattice with an `n_v`-point lattice.
pub fn product_grid(n_u: usize, n_v: usize) -> Result<Vec<CandidateAtom>> {
    let us = sphere_grid(n_u)?;
    let vs = sphere_grid(n_v)?;
    Ok(us.iter().flat_map(|&u| vs.iter().map(move |&v| CandidateAtom { u, v })).collect())
}

/// `v = −u` over an `n`-point lattice.
pub fn mirrored_grid(n: usize) -> Result<Vec<CandidateAtom>> {
    Ok(sphere_grid(n)?.into_iter().map(|u| CandidateAtom { u, v: -u }).collect())
}

/// Exactly `total` atoms: a product grid of side `⌈√(total/2)⌉` followed by
/// a mirrored grid carrying the remainder.
pub fn standard_grid(total: usize) -> Result<Vec<CandidateAtom>> {
    if total == 0 {
        return Err(invalid("grid needs at least one atom"));
    }
    let mut side = libm::ceil(libm::sqrt(total as f64 / 2.0)) as usize;
    while side * side > total {
        side -= 1;
    }
    let mut atoms = product_grid(side, side)?;
    let rest = total - side * side;
    if rest > 0 {
        atoms.extend(mirrored_grid(rest)?);
    }
    Ok(atoms)
}

/// FNV-1a over the little-endian bits of every coordinate, in order.
pub fn grid_hash(atoms: &[CandidateAtom]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for a in atoms {
        for c in a.u.to_array().into_iter().chain(a.v.to_array()) {
            for byte in c.to_bits().to_le_bytes() {
                h ^= u64::from(byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
    }
    h
}

/// Target values for one settings pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetConstraint {
    pub settings: SettingsPair,
    pub correlation: f64,
    /// `(E(A), E(B))`; required when marginals are enabled.
    pub marginals: Option<(f64, f64)>,
}

/// Singlet predictions for each pair, marginals included.
pub fn singlet_targets(pairs: &[SettingsPair]) -> Vec<TargetConstraint> {
    pairs
        .iter()
        .map(|s| TargetConstraint {
            settings: *s,
            correlation: singlet_correlation(s),
            marginals: Some(singlet_marginals(s)),
        })
        .collect()
}

/// Kind of a single inequality row. Marginal equalities appear as an upper
/// and a lower row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RowKind {
    /// `Σ w |x + y| ≤ 1 + E`
    Sum,
    /// `Σ w |x − y| ≤ 1 − E`
    Difference,
    /// `Σ w x ≤ mA`
    MarginalAUpper,
    /// `−Σ w x ≤ −mA`
    MarginalALower,
    MarginalBUpper,
    MarginalBLower,
}

impl RowKind {
    /// Coefficient of atom `(u, v)` and right-hand side of this row.
    pub fn evaluate(&self, atom: &CandidateAtom, t: &TargetConstraint) -> (f64, f64) {
        let x = atom.u.dot(&t.settings.a);
        let y = atom.v.dot(&t.settings.b);
        let (ma, mb) = t.marginals.unwrap_or((0.0, 0.0));
        match self {
            Self::Sum => (libm::fabs(x + y), 1.0 + t.correlation),
            Self::Difference => (libm::fabs(x - y), 1.0 - t.correlation),
            Self::MarginalAUpper => (x, ma),
            Self::MarginalALower => (-x, -ma),
            Self::MarginalBUpper => (y, mb),
            Self::MarginalBLower => (-y, -mb),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowInfo {
    pub constraint: usize,
    pub kind: RowKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificationProblem {
    atoms: Vec<CandidateAtom>,
    constraints: Vec<TargetConstraint>,
    include_marginals: bool,
    rows: Vec<RowInfo>,
    /// Row-major `rows × atoms`.
    matrix: Vec<f64>,
    rhs: Vec<f64>,
}

/// Assembles the inequality system for `grid` and `constraints`.
pub fn build_problem(
    grid: &[CandidateAtom],
    constraints: &[TargetConstraint],
    include_marginals: bool,
) -> Result<CertificationProblem> {
    if grid.is_empty() {
        return Err(invalid("atom grid is empty"));
    }
    if constraints.is_empty() {
        return Err(invalid("no settings-pair constraints"));
    }
    for (j, t) in constraints.iter().enumerate() {
        if !(t.correlation.is_finite() && libm::fabs(t.correlation) <= 1.0) {
            return Err(invalid(format!("constraint {j}: target correlation {} outside [-1, 1]", t.correlation)));
        }
        if include_marginals {
            match t.marginals {
                None => return Err(invalid(format!("constraint {j}: marginals enabled but no marginal targets"))),
                Some((ma, mb)) if !(libm::fabs(ma) <= 1.0 && libm::fabs(mb) <= 1.0) => {
                    return Err(invalid(format!("constraint {j}: marginal targets ({ma}, {mb}) outside [-1, 1]")))
                }
                _ => {}
            }
        }
    }
    let kinds: &[RowKind] = if include_marginals {
        &[
            RowKind::Sum,
            RowKind::Difference,
            RowKind::MarginalAUpper,
            RowKind::MarginalALower,
            RowKind::MarginalBUpper,
            RowKind::MarginalBLower,
        ]
    } else {
        &[RowKind::Sum, RowKind::Difference]
    };
    let rows: Vec<RowInfo> = (0..constraints.len())
        .flat_map(|constraint| kinds.iter().map(move |&kind| RowInfo { constraint, kind }))
        .collect();
    let mut matrix = Vec::with_capacity(rows.len() * grid.len());
    let mut rhs = Vec::with_capacity(rows.len());
    for row in &rows {
        let t = &constraints[row.constraint];
        rhs.push(row.kind.evaluate(&grid[0], t).1);
        matrix.extend(grid.iter().map(|a| row.kind.evaluate(a, t).0));
    }
    Ok(CertificationProblem {
        atoms: grid.to_vec(),
        constraints: constraints.to_vec(),
        include_marginals,
        rows,
        matrix,
        rhs,
    })
}

impl CertificationProblem {
    pub fn atoms(&self) -> &[CandidateAtom] {
        &self.atoms
    }

    pub fn constraints(&self) -> &[TargetConstraint] {
        &self.constraints
    }

    pub fn include_marginals(&self) -> bool {
        self.include_marginals
    }

    pub fn rows(&self) -> &[RowInfo] {
        &self.rows
    }

    pub fn grid_hash(&self) -> u64 {
        grid_hash(&self.atoms)
    }

    /// `min δ  s.t.  G w − δ 1 + s = h,  Σ w = 1,  w, δ, s ≥ 0`.
    fn relaxation_lp(&self) -> LinearProgram {
        let (k, n) = (self.rows.len(), self.atoms.len());
        let cols = n + 1 + k;
        let mut matrix = vec![0.0; (k + 1) * cols];
        for r in 0..k {
            let row = &mut matrix[r * cols..(r + 1) * cols];
            row[..n].copy_from_slice(&self.matrix[r * n..(r + 1) * n]);
            row[n] = -1.0;
            row[n + 1 + r] = 1.0;
        }
        matrix[k * cols..k * cols + n].iter_mut().for_each(|c| *c = 1.0);
        let mut rhs = self.rhs.clone();
        rhs.push(1.0);
        let mut cost = vec![0.0; cols];
        cost[n] = 1.0;
        LinearProgram { rows: k + 1, cols, matrix, rhs, cost }
    }
}

/// Nonnegative row multipliers (summing to one) and the slack they prove.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub multipliers: Vec<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Feasible { weights: Vec<f64> },
    Infeasible(FarkasCertificate),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCertificate {
    pub grid_hash: u64,
    pub verdict: Verdict,
}

impl FeasibilityCertificate {
    pub fn is_feasible(&self) -> bool {
        matches!(self.verdict, Verdict::Feasible { .. })
    }

    /// Proven slack for infeasible problems, zero otherwise.
    pub fn margin(&self) -> f64 {
        match &self.verdict {
            Verdict::Feasible { .. } => 0.0,
            Verdict::Infeasible(f) => f.margin,
        }
    }

    pub fn status(&self) -> &'static str {
        if self.is_feasible() {
            "feasible"
        } else {
            "infeasible"
        }
    }
}

/// Decides the problem and returns a certificate that passes
/// [`verify_certificate`]. [`Error::SolverFailure`] means the solver could
/// not produce such a certificate; it is never reported as infeasibility.
pub fn solve(p: &CertificationProblem) -> Result<FeasibilityCertificate> {
    let lp = p.relaxation_lp();
    let optimum = match lp.solve()? {
        LpOutcome::Optimal(o) => o,
        other => return Err(Error::SolverFailure(format!("relaxation LP reported {other:?}"))),
    };
    let n = p.atoms.len();
    let delta = optimum.x[n];
    let grid_hash = p.grid_hash();

    // Half the tolerance, so the rescaled witness still verifies.
    let verdict = if delta <= FEASIBILITY_TOL / 2.0 {
        let mut weights: Vec<f64> = optimum.x[..n].to_vec();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::SolverFailure("witness has no mass".into()));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Verdict::Feasible { weights }
    } else {
        let k = p.rows.len();
        // Row duals of a minimization with ≤-type slack are ≤ 0.
        let mut y: Vec<f64> = optimum.duals[..k].iter().map(|d| -d).collect();
        if let Some(bad) = y.iter().find(|&&v| v < -1e-7) {
            return Err(Error::SolverFailure(format!("dual multiplier {bad} has the wrong sign")));
        }
        y.iter_mut().for_each(|v| {
            if *v < 1e-14 {
                *v = 0.0
            }
        });
        let total: f64 = y.iter().sum();
        if !(total > 0.0) {
            return Err(Error::SolverFailure("dual vector vanished".into()));
        }
        y.iter_mut().for_each(|v| *v /= total);
        let margin = proven_margin(&p.matrix, &p.rhs, n, &y);
        if !(margin > 0.0) || libm::fabs(margin - delta) > 1e-6 {
            return Err(Error::SolverFailure(format!("dual margin {margin} disagrees with primal slack {delta}")));
        }
        Verdict::Infeasible(FarkasCertificate { multipliers: y, margin })
    };
    let cert = FeasibilityCertificate { grid_hash, verdict };
    if !verify_certificate(p, &cert)? {
        return Err(Error::SolverFailure("certificate failed independent verification".into()));
    }
    Ok(cert)
}

fn proven_margin(matrix: &[f64], rhs: &[f64], n: usize, y: &[f64]) -> f64 {
    let mut min_col = f64::INFINITY;
    for i in 0..n {
        let col: f64 = y.iter().enumerate().map(|(r, yr)| yr * matrix[r * n + i]).sum();
        min_col = min_col.min(col);
    }
    let hy: f64 = y.iter().zip(rhs).map(|(a, b)| a * b).sum();
    (min_col - hy) / y.iter().sum::<f64>()
}

/// Re-checks a certificate against the problem without trusting any solver
/// state: coefficients are recomputed from the geometry.
///
/// Witnesses must be nonnegative, sum to one within [`FEASIBILITY_TOL`], and
/// satisfy every row within it. Farkas vectors must be nonnegative with a
/// positive sum, and the margin recomputed from them must be positive and
/// agree with the stored one.
pub fn verify_certificate(p: &CertificationProblem, c: &FeasibilityCertificate) -> Result<bool> {
    if c.grid_hash != p.grid_hash() {
        return Err(invalid(format!(
            "certificate grid hash {:016x} does not match problem grid {:016x}",
            c.grid_hash,
            p.grid_hash()
        )));
    }
    let coefficient = |row: &RowInfo, atom: &CandidateAtom| row.kind.evaluate(atom, &p.constraints[row.constraint]);
    match &c.verdict {
        Verdict::Feasible { weights } => {
            if weights.len() != p.atoms.len() {
                return Err(invalid(format!("{} weights for {} atoms", weights.len(), p.atoms.len())));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) {
                return Ok(false);
            }
            let total: f64 = weights.iter().sum();
            if libm::fabs(total - 1.0) > FEASIBILITY_TOL {
                return Ok(false);
            }
            for row in &p.rows {
                let mut lhs = 0.0;
                let mut rhs = 0.0;
                for (atom, w) in p.atoms.iter().zip(weights) {
                    let (coef, h) = coefficient(row, atom);
                    lhs += w * coef;
                    rhs = h;
                }
                if lhs > rhs + FEASIBILITY_TOL {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Verdict::Infeasible(f) => {
            if f.multipliers.len() != p.rows.len() {
                return Err(invalid(format!("{} multipliers for {} rows", f.multipliers.len(), p.rows.len())));
            }
            if f.multipliers.iter().any(|y| !(*y >= 0.0)) {
                return Ok(false);
            }
            let total: f64 = f.multipliers.iter().sum();
            if !(total > 0.0) {
                return Ok(false);
            }
            let mut hy = 0.0;
            let mut columns = vec![0.0; p.atoms.len()];
            for (row, y) in p.rows.iter().zip(&f.multipliers) {
                if *y == 0.0 {
                    continue;
                }
                for (col, atom) in columns.iter_mut().zip(&p.atoms) {
                    *col += y * coefficient(row, atom).0;
                }
                hy += y * coefficient(row, &p.atoms[0]).1;
            }
            let min_col = columns.iter().copied().fold(f64::INFINITY, f64::min);
            let margin = (min_col - hy) / total;
            Ok(margin > 0.0 && libm::fabs(margin - f.margin) <= FEASIBILITY_TOL)
        }
    }
}

/// A feasible witness as a distribution (zero weights pruned).
pub fn witness_distribution(p: &CertificationProblem, weights: &[f64]) -> Result<SubensembleDistribution> {
    if weights.len() != p.atoms.len() {
        return Err(invalid(format!("{} weights for {} atoms", weights.len(), p.atoms.len())));
    }
    SubensembleDistribution::new(
        p.atoms.iter().zip(weights).map(|(a, &weight)| Atom { u: a.u, v: a.v, weight }).collect(),
    )
}
