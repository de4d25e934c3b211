//! Singlet-state predictions and the CHSH combination.

use core::f64::consts::PI;

use rand::Rng;

use crate::model::SettingsPair;
use crate::sphere::{random_unit_vector, Rotation, UnitVector3};

/// Classical (local) bound on `|S|`.
pub const CHSH_CLASSICAL_BOUND: f64 = 2.0;

/// Tsirelson's bound `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * core::f64::consts::SQRT_2;

/// `E(AB) = −a·b` for the spin singlet.
pub fn singlet_correlation(s: &SettingsPair) -> f64 {
    -s.a.dot(&s.b)
}

/// Singlet marginals `E(A) = E(B) = 0` for every setting.
pub fn singlet_marginals(_s: &SettingsPair) -> (f64, f64) {
    (0.0, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshScenario {
    pub a: UnitVector3,
    pub a_prime: UnitVector3,
    pub b: UnitVector3,
    pub b_prime: UnitVector3,
}

impl ChshScenario {
    /// Coplanar settings at azimuths 0°, 90°, 225°, 135°, where the singlet
    /// reaches `|S| = 2√2`.
    pub fn standard() -> Self {
        Self::planar(0.0, PI / 2.0, 5.0 * PI / 4.0, 3.0 * PI / 4.0)
    }

    /// All four settings on the x–y equator at the given azimuths.
    pub fn planar(a: f64, a_prime: f64, b: f64, b_prime: f64) -> Self {
        Self {
            a: UnitVector3::in_plane(a),
            a_prime: UnitVector3::in_plane(a_prime),
            b: UnitVector3::in_plane(b),
            b_prime: UnitVector3::in_plane(b_prime),
        }
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            a: random_unit_vector(rng),
            a_prime: random_unit_vector(rng),
            b: random_unit_vector(rng),
            b_prime: random_unit_vector(rng),
        }
    }

    pub fn rotated(&self, r: &Rotation) -> Self {
        Self {
            a: r.apply(&self.a),
            a_prime: r.apply(&self.a_prime),
            b: r.apply(&self.b),
            b_prime: r.apply(&self.b_prime),
        }
    }

    /// The four settings pairs in the order they enter `S`:
    /// `(a,b), (a,b′), (a′,b), (a′,b′)`.
    pub fn pairs(&self) -> [SettingsPair; 4] {
        [
            SettingsPair::new(self.a, self.b),
            SettingsPair::new(self.a, self.b_prime),
            SettingsPair::new(self.a_prime, self.b),
            SettingsPair::new(self.a_prime, self.b_prime),
        ]
    }
}

/// `S = E(a,b) + E(a,b′) + E(a′,b) − E(a′,b′)`.
pub fn chsh_value<F>(sc: &ChshScenario, mut corr: F) -> f64
where
    F: FnMut(&SettingsPair) -> f64,
{
    let [ab, abp, apb, apbp] = sc.pairs();
    corr(&ab) + corr(&abp) + corr(&apb) - corr(&apbp)
}
