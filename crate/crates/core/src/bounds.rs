//! The derivation chain from outcomes to averaged bounds.
//!
//! For `A, B ∈ {−1, 1}`, `−1 + |A + B| = AB = 1 − |A − B|`. Conditioning on
//! `(u, v)` and using `|E X| ≤ E|X|` gives
//!
//! ```text
//! −1 + |u·a + v·b|  ≤  E(AB | u, v)  ≤  1 − |u·a − v·b|
//! ```
//!
//! and averaging over `P_uv` gives the same shape with the absolute values
//! integrated. Integrals are always weighted sums over atoms here.

use alloc::format;

use crate::error::{invalid, Result};
use crate::model::{OutcomePair, SettingsPair, SubensembleDistribution};
use crate::sphere::UnitVector3;

/// Default statistical allowance, in standard errors, for Monte Carlo
/// comparisons.
pub const DEFAULT_K_SIGMA: f64 = 4.0;

/// Absolute slack for "exact" containment checks. The extreme couplings
/// attain the bounds with equality, so a few ulps of rounding must pass.
pub const ROUNDING_SLACK: f64 = 1e-12;

/// The three members of the pointwise identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityTerms {
    /// `−1 + |A + B|`
    pub lhs: f64,
    /// `AB`
    pub mid: f64,
    /// `1 − |A − B|`
    pub rhs: f64,
}

impl IdentityTerms {
    pub fn holds(&self) -> bool {
        self.lhs == self.mid && self.mid == self.rhs
    }
}

pub fn pointwise_identity(o: OutcomePair) -> Result<IdentityTerms> {
    o.validate()?;
    let (a, b) = (f64::from(o.alice), f64::from(o.bob));
    Ok(IdentityTerms { lhs: -1.0 + libm::fabs(a + b), mid: a * b, rhs: 1.0 - libm::fabs(a - b) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeggettBounds {
    pub lower: f64,
    pub upper: f64,
}

impl LeggettBounds {
    /// Bounds from the conditional means `x = E(A|·)`, `y = E(B|·)`.
    pub fn from_means(x: f64, y: f64) -> Self {
        Self { lower: -1.0 + libm::fabs(x + y), upper: 1.0 - libm::fabs(x - y) }
    }

    pub fn contains(&self, value: f64, slack: f64) -> bool {
        self.lower - slack <= value && value <= self.upper + slack
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsVerdict {
    pub satisfied: bool,
    /// `min(value − lower, upper − value)`, before any allowance.
    pub margin: f64,
    pub k_sigma: f64,
}

/// `−1 + |u·a + v·b| ≤ E(AB|u,v) ≤ 1 − |u·a − v·b|`.
pub fn conditional_bounds(u: &UnitVector3, v: &UnitVector3, s: &SettingsPair) -> LeggettBounds {
    LeggettBounds::from_means(u.dot(&s.a), v.dot(&s.b))
}

/// `lower = −1 + Σ w|u·a + v·b|`, `upper = 1 − Σ w|u·a − v·b|`.
pub fn averaged_bounds(d: &SubensembleDistribution, s: &SettingsPair) -> Result<LeggettBounds> {
    if d.is_empty() {
        return Err(invalid("averaged bounds need a nonempty distribution"));
    }
    let (mut plus, mut minus) = (0.0, 0.0);
    for atom in d.atoms() {
        let (x, y) = (atom.u.dot(&s.a), atom.v.dot(&s.b));
        plus += atom.weight * libm::fabs(x + y);
        minus += atom.weight * libm::fabs(x - y);
    }
    Ok(LeggettBounds { lower: -1.0 + plus, upper: 1.0 - minus })
}

/// Compares `value ± k_sigma·se` against the bounds.
pub fn check_bounds(value: f64, se: f64, b: &LeggettBounds, k_sigma: f64) -> Result<BoundsVerdict> {
    if !(se >= 0.0 && k_sigma >= 0.0) {
        return Err(invalid(format!("need se >= 0 and k_sigma >= 0, got {se} and {k_sigma}")));
    }
    let allowance = k_sigma * se;
    Ok(BoundsVerdict {
        satisfied: b.lower - allowance <= value && value <= b.upper + allowance,
        margin: (value - b.lower).min(b.upper - value),
        k_sigma,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        conditional_marginals, exact_model_correlation, joint_conditional_law, Atom, Coupling, LeggettModel,
    };
    use crate::rng::RngSeed;
    use crate::sphere::{random_unit_vector, Rotation};
    use alloc::vec::Vec;
    use proptest::prelude::*;

    #[test]
    fn identity_examples() {
        let t = |a, b| pointwise_identity(OutcomePair::new(a, b).unwrap()).unwrap();
        assert_eq!(t(1, 1), IdentityTerms { lhs: 1.0, mid: 1.0, rhs: 1.0 });
        assert_eq!(t(1, -1), IdentityTerms { lhs: -1.0, mid: -1.0, rhs: -1.0 });
        assert_eq!(t(-1, -1), IdentityTerms { lhs: 1.0, mid: 1.0, rhs: 1.0 });
        assert!(OutcomePair::ALL.iter().all(|&o| pointwise_identity(o).unwrap().holds()));
        assert!(pointwise_identity(OutcomePair { alice: 0, bob: 1 }).is_err());
    }

    #[test]
    fn conditional_examples() {
        let s = SettingsPair::new(UnitVector3::X, UnitVector3::Y);
        assert_eq!(conditional_bounds(&s.a, &s.b, &s), LeggettBounds { lower: 1.0, upper: 1.0 });
        let vacuous = conditional_bounds(&UnitVector3::Z, &UnitVector3::Z, &s);
        assert_eq!(vacuous, LeggettBounds { lower: -1.0, upper: 1.0 });
        assert_eq!(LeggettBounds::from_means(0.5, -0.5), LeggettBounds { lower: -1.0, upper: 0.0 });
    }

    #[test]
    fn check_examples() {
        let vac = LeggettBounds { lower: -1.0, upper: 1.0 };
        let v = check_bounds(0.0, 0.0, &vac, 4.0).unwrap();
        assert!(v.satisfied);
        assert_eq!(v.margin, 1.0);

        let tight = LeggettBounds { lower: -1.0, upper: 0.0 };
        let v = check_bounds(1.0, 0.0, &tight, 4.0).unwrap();
        assert!(!v.satisfied);
        assert_eq!(v.margin, -1.0);

        let v = check_bounds(0.05, 0.02, &tight, 4.0).unwrap();
        assert!(v.satisfied);
        assert!((v.margin + 0.05).abs() < 1e-15);

        assert!(check_bounds(0.0, -1.0, &vac, 4.0).is_err());
        assert!(check_bounds(0.0, 0.1, &vac, -1.0).is_err());
    }

    #[test]
    fn point_mass_reduces_to_conditional() {
        let mut rng = RngSeed::new(3, 0).stream();
        for _ in 0..100 {
            let (u, v) = (random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let s = SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let d = SubensembleDistribution::point_mass(u, v);
            assert_eq!(averaged_bounds(&d, &s).unwrap(), conditional_bounds(&u, &v, &s));
        }
    }

    #[test]
    fn mixture_terms_are_linear() {
        let mut rng = RngSeed::new(4, 0).stream();
        let p = SubensembleDistribution::isotropic_random(7, &mut rng).unwrap();
        let q = SubensembleDistribution::mirrored_random(5, &mut rng).unwrap();
        let s = SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng));
        let lambda = 0.37;
        let mix = averaged_bounds(&SubensembleDistribution::mixture(&p, &q, lambda).unwrap(), &s).unwrap();
        let (bp, bq) = (averaged_bounds(&p, &s).unwrap(), averaged_bounds(&q, &s).unwrap());
        let lower = -1.0 + lambda * (bp.lower + 1.0) + (1.0 - lambda) * (bq.lower + 1.0);
        let upper = 1.0 - lambda * (1.0 - bp.upper) - (1.0 - lambda) * (1.0 - bq.upper);
        assert!((mix.lower - lower).abs() < 1e-12);
        assert!((mix.upper - upper).abs() < 1e-12);
    }

    #[test]
    fn grid_integral_agrees_with_monte_carlo() {
        // Two independent integrators of E|u·a + v·b| for independent uniform u, v.
        let d = SubensembleDistribution::isotropic_grid(100, 100).unwrap();
        let mut rng = RngSeed::new(8, 0).stream();
        for _ in 0..3 {
            let s = SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let grid = averaged_bounds(&d, &s).unwrap().lower + 1.0;
            let n = 1_000_000;
            let (mut sum, mut sq) = (0.0, 0.0);
            for _ in 0..n {
                let (u, v) = (random_unit_vector(&mut rng), random_unit_vector(&mut rng));
                let x = (u.dot(&s.a) + v.dot(&s.b)).abs();
                sum += x;
                sq += x * x;
            }
            let mean = sum / n as f64;
            let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
            assert!((grid - mean).abs() <= 3.0 * se, "grid {grid} mc {mean} se {se}");
        }
    }

    fn random_model(rng: &mut crate::rng::Stream, coupling: Coupling) -> LeggettModel {
        let n = 1 + (rand::Rng::random::<u32>(rng) % 20) as usize;
        let atoms: Vec<Atom> = (0..n)
            .map(|_| Atom {
                u: random_unit_vector(rng),
                v: random_unit_vector(rng),
                weight: rand::Rng::random::<f64>(rng) + 1e-3,
            })
            .collect();
        LeggettModel::new(SubensembleDistribution::new(atoms).unwrap(), coupling)
    }

    proptest! {
        #[test]
        fn conditional_correlation_lies_within_bounds(seed in any::<u64>()) {
            let mut rng = RngSeed::new(seed, 0).stream();
            let (u, v) = (random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let s = SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let b = conditional_bounds(&u, &v, &s);
            prop_assert!(-1.0 <= b.lower && b.lower <= b.upper && b.upper <= 1.0);
            let (pa, pb) = conditional_marginals(&u, &v, &s);
            for c in Coupling::ALL {
                let e = joint_conditional_law(pa, pb, c).unwrap().correlation();
                prop_assert!(b.contains(e, ROUNDING_SLACK), "{c}: {e} not in {b:?}");
            }
        }

        #[test]
        fn model_correlation_lies_within_averaged_bounds(seed in any::<u64>()) {
            let mut rng = RngSeed::new(seed, 1).stream();
            for c in Coupling::ALL {
                let m = random_model(&mut rng, c);
                let s = SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng));
                let b = averaged_bounds(m.distribution(), &s).unwrap();
                prop_assert!(-1.0 <= b.lower && b.lower <= b.upper + ROUNDING_SLACK && b.upper <= 1.0);
                prop_assert!(b.contains(exact_model_correlation(&m, &s), ROUNDING_SLACK));
            }
        }

        #[test]
        fn bounds_are_rotation_invariant(seed in any::<u64>()) {
            let mut rng = RngSeed::new(seed, 2).stream();
            let m = random_model(&mut rng, Coupling::Independent);
            let s = SettingsPair::new(random_unit_vector(&mut rng), random_unit_vector(&mut rng));
            let r = Rotation::random(&mut rng);
            let rotated: Vec<Atom> = m
                .distribution()
                .atoms()
                .iter()
                .map(|a| Atom { u: r.apply(&a.u), v: r.apply(&a.v), weight: a.weight })
                .collect();
            let rd = SubensembleDistribution::new(rotated).unwrap();
            let rs = SettingsPair::new(r.apply(&s.a), r.apply(&s.b));
            let b0 = averaged_bounds(m.distribution(), &s).unwrap();
            let b1 = averaged_bounds(&rd, &rs).unwrap();
            prop_assert!((b0.lower - b1.lower).abs() <= 1e-12 && (b0.upper - b1.upper).abs() <= 1e-12);
            let a0 = &m.distribution().atoms()[0];
            let c0 = conditional_bounds(&a0.u, &a0.v, &s);
            let c1 = conditional_bounds(&r.apply(&a0.u), &r.apply(&a0.v), &rs);
            prop_assert!((c0.lower - c1.lower).abs() <= 1e-12 && (c0.upper - c1.upper).abs() <= 1e-12);
        }
    }
}
