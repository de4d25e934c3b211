//! Executable hidden-variable models.
//!
//! A [`LeggettModel`] is a settings-independent [`SubensembleDistribution`]
//! over pairs `(u, v)` together with a [`Coupling`] that fixes the joint law
//! of the two outcomes given `(u, v)`. Only the conditional means are
//! constrained (`E(A|u,v) = u·a`, `E(B|u,v) = v·b`); the coupling picks one
//! of the joint laws compatible with them.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::sphere::{random_unit_vector, sphere_grid, UnitVector3};

/// Outcomes of one run. Values outside `{-1, +1}` are representable so that
/// evaluators can report them as errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OutcomePair {
    pub alice: i8,
    pub bob: i8,
}

impl OutcomePair {
    /// All four admissible pairs, `(+,+), (+,−), (−,+), (−,−)`.
    pub const ALL: [Self; 4] = [
        Self { alice: 1, bob: 1 },
        Self { alice: 1, bob: -1 },
        Self { alice: -1, bob: 1 },
        Self { alice: -1, bob: -1 },
    ];

    pub fn new(alice: i8, bob: i8) -> Result<Self> {
        let pair = Self { alice, bob };
        pair.validate()?;
        Ok(pair)
    }

    pub fn validate(&self) -> Result<()> {
        if matches!(self.alice, -1 | 1) && matches!(self.bob, -1 | 1) {
            Ok(())
        } else {
            Err(invalid(format!("outcomes must be ±1, got ({}, {})", self.alice, self.bob)))
        }
    }

    pub fn product(&self) -> i8 {
        self.alice * self.bob
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingsPair {
    pub a: UnitVector3,
    pub b: UnitVector3,
}

impl SettingsPair {
    pub const fn new(a: UnitVector3, b: UnitVector3) -> Self {
        Self { a, b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Coupling {
    /// Product law.
    Independent,
    /// Maximal `P(A=1, B=1)`.
    Comonotone,
    /// Maximal `P(A=1, B=−1)`.
    Antimonotone,
}

impl Coupling {
    pub const ALL: [Self; 3] = [Self::Independent, Self::Comonotone, Self::Antimonotone];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Independent => "independent",
            Self::Comonotone => "comonotone",
            Self::Antimonotone => "antimonotone",
        }
    }
}

impl fmt::Display for Coupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Coupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| invalid(format!("unknown coupling '{s}'")))
    }
}

/// Joint law of `(A, B)` on `{−1, 1}²`. Fields are named by signs:
/// `plus_minus` is `P(A = 1, B = −1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLaw {
    pub plus_plus: f64,
    pub plus_minus: f64,
    pub minus_plus: f64,
    pub minus_minus: f64,
}

impl JointLaw {
    pub fn probability(&self, o: OutcomePair) -> f64 {
        match (o.alice > 0, o.bob > 0) {
            (true, true) => self.plus_plus,
            (true, false) => self.plus_minus,
            (false, true) => self.minus_plus,
            (false, false) => self.minus_minus,
        }
    }

    pub fn marginal_a(&self) -> f64 {
        self.plus_plus + self.plus_minus
    }

    pub fn marginal_b(&self) -> f64 {
        self.plus_plus + self.minus_plus
    }

    /// `E(AB)` under this law.
    pub fn correlation(&self) -> f64 {
        (self.plus_plus + self.minus_minus - self.plus_minus - self.minus_plus).clamp(-1.0, 1.0)
    }

    /// Maps a uniform draw in `[0, 1)` to an outcome pair by inverse CDF in
    /// the order of [`OutcomePair::ALL`].
    pub fn draw(&self, r: f64) -> OutcomePair {
        let mut acc = self.plus_plus;
        if r < acc {
            return OutcomePair::ALL[0];
        }
        acc += self.plus_minus;
        if r < acc {
            return OutcomePair::ALL[1];
        }
        acc += self.minus_plus;
        if r < acc {
            return OutcomePair::ALL[2];
        }
        OutcomePair::ALL[3]
    }
}

/// `P(A = 1 | u, v)` and `P(B = 1 | u, v)` from the Malus-law means.
pub fn conditional_marginals(u: &UnitVector3, v: &UnitVector3, s: &SettingsPair) -> (f64, f64) {
    ((1.0 + u.dot(&s.a)) / 2.0, (1.0 + v.dot(&s.b)) / 2.0)
}

/// Joint law with marginals `P(A=1) = p_a`, `P(B=1) = p_b` under the given
/// coupling.
pub fn joint_conditional_law(p_a: f64, p_b: f64, coupling: Coupling) -> Result<JointLaw> {
    for (name, p) in [("p_a", p_a), ("p_b", p_b)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(invalid(format!("{name} = {p} is not a probability")));
        }
    }
    let law = match coupling {
        Coupling::Independent => JointLaw {
            plus_plus: p_a * p_b,
            plus_minus: p_a * (1.0 - p_b),
            minus_plus: (1.0 - p_a) * p_b,
            minus_minus: (1.0 - p_a) * (1.0 - p_b),
        },
        Coupling::Comonotone => {
            let pp = p_a.min(p_b);
            JointLaw {
                plus_plus: pp,
                plus_minus: p_a - pp,
                minus_plus: p_b - pp,
                minus_minus: (1.0 - p_a.max(p_b)).max(0.0),
            }
        }
        Coupling::Antimonotone => {
            let pm = p_a.min(1.0 - p_b);
            JointLaw {
                plus_plus: p_a - pm,
                plus_minus: pm,
                minus_plus: (p_b - p_a + pm).max(0.0),
                minus_minus: 1.0 - p_b - pm,
            }
        }
    };
    Ok(law)
}

/// One weighted point mass of `P_uv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub u: UnitVector3,
    pub v: UnitVector3,
    pub weight: f64,
}

/// Atomic distribution of the hidden pair `(u, v)`. Weights are positive
/// and sum to one; there is deliberately no field that could refer to a
/// measurement setting.
#[derive(Debug, Clone, PartialEq)]
pub struct SubensembleDistribution {
    atoms: Vec<Atom>,
}

impl SubensembleDistribution {
    /// Normalizes weights to sum one and prunes zero-weight atoms.
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        Self::normalized(atoms, None)
    }

    /// Like [`new`](Self::new) but rejects weight sums further than `tol`
    /// from one instead of silently rescaling them.
    pub fn with_sum_tolerance(atoms: Vec<Atom>, tol: f64) -> Result<Self> {
        Self::normalized(atoms, Some(tol))
    }

    fn normalized(mut atoms: Vec<Atom>, tol: Option<f64>) -> Result<Self> {
        if let Some(bad) = atoms.iter().find(|a| !(a.weight.is_finite() && a.weight >= 0.0)) {
            return Err(invalid(format!("atom weight {} must be finite and nonnegative", bad.weight)));
        }
        atoms.retain(|a| a.weight > 0.0);
        if atoms.is_empty() {
            return Err(invalid("distribution has no atom with positive weight"));
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if let Some(tol) = tol {
            if libm::fabs(total - 1.0) > tol {
                return Err(invalid(format!("weights sum to {total}, expected 1 within {tol}")));
            }
        }
        for a in &mut atoms {
            a.weight /= total;
        }
        Ok(Self { atoms })
    }

    pub fn point_mass(u: UnitVector3, v: UnitVector3) -> Self {
        Self { atoms: alloc::vec![Atom { u, v, weight: 1.0 }] }
    }

    /// `n` equally weighted atoms with `u`, `v` independent and uniform.
    pub fn isotropic_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(invalid("isotropic distribution needs at least one atom"));
        }
        let weight = 1.0 / n as f64;
        let atoms = (0..n)
            .map(|_| {
                let u = random_unit_vector(rng);
                let v = random_unit_vector(rng);
                Atom { u, v, weight }
            })
            .collect();
        Self::new(atoms)
    }

    /// Product of two Fibonacci lattices, `n_u · n_v` equal-weight atoms.
    pub fn isotropic_grid(n_u: usize, n_v: usize) -> Result<Self> {
        let us = sphere_grid(n_u)?;
        let vs = sphere_grid(n_v)?;
        let weight = 1.0 / (n_u * n_v) as f64;
        let atoms = us.iter().flat_map(|&u| vs.iter().map(move |&v| Atom { u, v, weight })).collect();
        Self::new(atoms)
    }

    /// `v = −u` with `u` on an `n`-point Fibonacci lattice.
    pub fn mirrored_grid(n: usize) -> Result<Self> {
        let weight = 1.0 / n.max(1) as f64;
        let atoms = sphere_grid(n)?.into_iter().map(|u| Atom { u, v: -u, weight }).collect();
        Self::new(atoms)
    }

    /// `v = −u` with `n` uniformly random `u`.
    pub fn mirrored_random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(invalid("mirrored distribution needs at least one atom"));
        }
        let weight = 1.0 / n as f64;
        let atoms = (0..n)
            .map(|_| {
                let u = random_unit_vector(rng);
                Atom { u, v: -u, weight }
            })
            .collect();
        Self::new(atoms)
    }

    /// `λ·p + (1 − λ)·q` as a concatenated atom list.
    pub fn mixture(p: &Self, q: &Self, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(invalid(format!("mixing weight {lambda} outside [0, 1]")));
        }
        let left = p.atoms.iter().map(|a| Atom { weight: a.weight * lambda, ..*a });
        let right = q.atoms.iter().map(|a| Atom { weight: a.weight * (1.0 - lambda), ..*a });
        Self::new(left.chain(right).collect())
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `Σ w u` and `Σ w v` (not normalized).
    pub fn mean_vectors(&self) -> ([f64; 3], [f64; 3]) {
        let mut mu = [0.0; 3];
        let mut mv = [0.0; 3];
        for a in &self.atoms {
            for k in 0..3 {
                mu[k] += a.weight * a.u.to_array()[k];
                mv[k] += a.weight * a.v.to_array()[k];
            }
        }
        (mu, mv)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeggettModel {
    distribution: SubensembleDistribution,
    coupling: Coupling,
    cumulative: Vec<f64>,
}

impl LeggettModel {
    pub fn new(distribution: SubensembleDistribution, coupling: Coupling) -> Self {
        let cumulative = distribution
            .atoms
            .iter()
            .scan(0.0, |acc, a| {
                *acc += a.weight;
                Some(*acc)
            })
            .collect();
        Self { distribution, coupling, cumulative }
    }

    pub fn distribution(&self) -> &SubensembleDistribution {
        &self.distribution
    }

    pub fn coupling(&self) -> Coupling {
        self.coupling
    }

    /// Index of the atom selected by a uniform draw `r ∈ [0, 1)`.
    pub fn atom_index(&self, r: f64) -> usize {
        let total = *self.cumulative.last().expect("distribution is never empty");
        let target = r * total;
        self.cumulative.partition_point(|&c| c <= target).min(self.cumulative.len() - 1)
    }

    /// Joint law of the outcomes given atom `index` and settings `s`.
    pub fn atom_law(&self, index: usize, s: &SettingsPair) -> JointLaw {
        let atom = &self.distribution.atoms[index];
        let (p_a, p_b) = conditional_marginals(&atom.u, &atom.v, s);
        joint_conditional_law(p_a, p_b, self.coupling).expect("clamped dot products give probabilities")
    }
}

/// Draws an atom with probability `w`, then an outcome pair from that
/// atom's joint law. Consumes exactly two uniforms.
pub fn sample_outcomes<R: Rng + ?Sized>(m: &LeggettModel, s: &SettingsPair, rng: &mut R) -> OutcomePair {
    let index = m.atom_index(rng.random::<f64>());
    m.atom_law(index, s).draw(rng.random::<f64>())
}

/// `Σ_i w_i · E(AB | u_i, v_i)` computed from the exact joint laws.
pub fn exact_model_correlation(m: &LeggettModel, s: &SettingsPair) -> f64 {
    let total: f64 =
        m.distribution.atoms.iter().enumerate().map(|(i, a)| a.weight * m.atom_law(i, s).correlation()).sum();
    total.clamp(-1.0, 1.0)
}

/// Exact `E(A)` and `E(B)`: `(Σ w u)·a` and `(Σ w v)·b`.
pub fn exact_model_marginals(m: &LeggettModel, s: &SettingsPair) -> (f64, f64) {
    let (mu, mv) = m.distribution.mean_vectors();
    let a = s.a.to_array();
    let b = s.b.to_array();
    let ea: f64 = (0..3).map(|k| mu[k] * a[k]).sum();
    let eb: f64 = (0..3).map(|k| mv[k] * b[k]).sum();
    (ea.clamp(-1.0, 1.0), eb.clamp(-1.0, 1.0))
}
