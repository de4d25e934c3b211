//! Dense two-phase tableau simplex for `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! Sized for the certification LPs: a few dozen rows and a few thousand
//! columns. Entering variables follow Dantzig's rule (most negative reduced
//! cost, lowest index on ties); after a long run of degenerate pivots the
//! rule switches to Bland's until progress resumes. The ratio test breaks
//! ties on the lowest basic variable index. Both rules are deterministic.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-11;
const RATIO_TIE: f64 = 1e-12;
const GROWTH_LIMIT: f64 = 1e12;
const DEGENERATE_STREAK: usize = 64;

/// Equality-form linear program with a dense row-major constraint matrix.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub rows: usize,
    pub cols: usize,
    pub matrix: Vec<f64>,
    pub rhs: Vec<f64>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    /// Row multipliers `y` with `cᵀ − yᵀA ≥ 0` at the optimum.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(Optimum),
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: usize,
    structural: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    pivots: usize,
    limit: usize,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.cells[r * self.width + c]
    }

    fn rhs(&self, r: usize) -> f64 {
        self.at(r, self.width - 1)
    }

    fn recompute_reduced(&mut self, cost: &[f64]) {
        for j in 0..self.width {
            let own = cost.get(j).copied().unwrap_or(0.0);
            let z: f64 = (0..self.rows).map(|r| cost.get(self.basis[r]).copied().unwrap_or(0.0) * self.at(r, j)).sum();
            self.reduced[j] = own - z;
        }
    }

    fn pivot(&mut self, row: usize, col: usize) -> Result<()> {
        let w = self.width;
        let p = self.at(row, col);
        let mut growth: f64 = 0.0;
        for c in 0..w {
            let v = self.cells[row * w + c] / p;
            self.cells[row * w + c] = v;
            growth = growth.max(libm::fabs(v));
        }
        if !(growth < GROWTH_LIMIT) {
            return Err(Error::SolverFailure(format!("tableau growth {growth:e} after pivot on {p:e}")));
        }
        let (pivot_row, rest) = (row * w, w);
        for r in 0..self.rows {
            if r == row {
                continue;
            }
            let f = self.cells[r * w + col];
            if f != 0.0 {
                for c in 0..rest {
                    self.cells[r * w + c] -= f * self.cells[pivot_row + c];
                }
                self.cells[r * w + col] = 0.0;
                let b = &mut self.cells[r * w + w - 1];
                if *b < 0.0 && *b > -RATIO_TIE {
                    *b = 0.0;
                }
            }
        }
        let f = self.reduced[col];
        if f != 0.0 {
            for c in 0..w {
                self.reduced[c] -= f * self.cells[pivot_row + c];
            }
            self.reduced[col] = 0.0;
        }
        self.basis[row] = col;
        self.pivots += 1;
        Ok(())
    }

    /// Runs simplex iterations over columns `< allowed`. Returns `false` if
    /// the objective is unbounded below.
    fn optimize(&mut self, allowed: usize) -> Result<bool> {
        let mut degenerate_run = 0usize;
        loop {
            if self.pivots > self.limit {
                return Err(Error::SolverFailure(format!("no convergence after {} pivots", self.pivots)));
            }
            let entering = if degenerate_run >= DEGENERATE_STREAK {
                (0..allowed).find(|&j| self.reduced[j] < -COST_TOL)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..allowed {
                    let d = self.reduced[j];
                    if d < -COST_TOL && best.is_none_or(|(_, bd)| d < bd) {
                        best = Some((j, d));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else { return Ok(true) };

            let mut leaving: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let a = self.at(r, col);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leaving = match leaving {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio - RATIO_TIE
                                || (ratio <= bratio + RATIO_TIE && self.basis[r] < self.basis[br])
                            {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            let Some((row, ratio)) = leaving else { return Ok(false) };
            if ratio <= RATIO_TIE {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(row, col)?;
        }
    }
}

impl LinearProgram {
    pub fn solve(&self) -> Result<LpOutcome> {
        let (m, n) = (self.rows, self.cols);
        if self.matrix.len() != m * n || self.rhs.len() != m || self.cost.len() != n {
            return Err(crate::error::invalid("linear program dimensions are inconsistent"));
        }
        if self.matrix.iter().chain(&self.rhs).chain(&self.cost).any(|v| !v.is_finite()) {
            return Err(crate::error::invalid("linear program has non-finite data"));
        }
        // Columns: structural 0..n, artificials n..n+m, then the right-hand side.
        let width = n + m + 1;
        let mut cells = vec![0.0; m * width];
        let mut sign = vec![1.0; m];
        for r in 0..m {
            sign[r] = if self.rhs[r] < 0.0 { -1.0 } else { 1.0 };
            for c in 0..n {
                cells[r * width + c] = sign[r] * self.matrix[r * n + c];
            }
            cells[r * width + n + r] = 1.0;
            cells[r * width + width - 1] = sign[r] * self.rhs[r];
        }
        let mut t = Tableau {
            rows: m,
            structural: n,
            width,
            cells,
            basis: (n..n + m).collect(),
            reduced: vec![0.0; width],
            pivots: 0,
            limit: 50 * (m + n) + 1000,
        };

        let mut phase_one = vec![0.0; n + m];
        phase_one[n..].iter_mut().for_each(|c| *c = 1.0);
        t.recompute_reduced(&phase_one);
        t.optimize(n + m)?;
        let scale = 1.0 + self.rhs.iter().map(|b| libm::fabs(*b)).fold(0.0, f64::max);
        let infeasibility: f64 = (0..m).filter(|&r| t.basis[r] >= n).map(|r| t.rhs(r)).sum();
        if infeasibility > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }

        // Drive zero-level artificials out of the basis where possible.
        for r in 0..m {
            if t.basis[r] >= n {
                if let Some(c) = (0..n).find(|&c| libm::fabs(t.at(r, c)) > PIVOT_TOL) {
                    t.pivot(r, c)?;
                }
            }
        }

        let mut cost = self.cost.clone();
        cost.resize(n + m, 0.0);
        t.recompute_reduced(&cost);
        if !t.optimize(n)? {
            return Ok(LpOutcome::Unbounded);
        }

        let mut x = vec![0.0; n];
        for r in 0..m {
            if t.basis[r] < t.structural {
                x[t.basis[r]] = t.rhs(r).max(0.0);
            }
        }
        let duals = (0..m)
            .map(|k| {
                let y: f64 = (0..m).map(|r| cost[t.basis[r]] * t.at(r, n + k)).sum();
                sign[k] * y
            })
            .collect();
        let objective = x.iter().zip(&self.cost).map(|(a, b)| a * b).sum();
        Ok(LpOutcome::Optimal(Optimum { x, duals, objective, pivots: t.pivots }))
    }
}
