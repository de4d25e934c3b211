//! Points on the unit sphere S².
//!
//! Settings `a`, `b` and hidden vectors `u`, `v` all live here. Every
//! [`UnitVector3`] is normalized on construction, so the unit-norm invariant
//! holds to within a few ulps everywhere downstream.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};

/// Norms below this are rejected, both on construction and in the
/// Gaussian sampler.
pub const MIN_NORM: f64 = 1e-8;

/// `(√5 − 1) / 2`, the golden-ratio conjugate used for lattice azimuths.
pub const GOLDEN_RATIO_CONJUGATE: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    pub const X: Self = Self { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Self = Self { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Self = Self { x: 0.0, y: 0.0, z: 1.0 };

    /// Normalizes `(x, y, z)`. Fails on non-finite input or a norm below
    /// [`MIN_NORM`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(invalid(format!("non-finite vector ({x}, {y}, {z})")));
        }
        let norm = libm::sqrt(x * x + y * y + z * z);
        if norm < MIN_NORM {
            return Err(invalid(format!("vector norm {norm} too small to normalize")));
        }
        Ok(Self::scaled(x, y, z, norm))
    }

    /// Accepts `(x, y, z)` only if its norm is already within `tol` of 1.
    /// Coordinates that are unit to rounding are kept bit for bit, so saved
    /// vectors reload unchanged; others are renormalized.
    pub fn from_unit(x: f64, y: f64, z: f64, tol: f64) -> Result<Self> {
        let v = Self::new(x, y, z)?;
        let norm = libm::sqrt(x * x + y * y + z * z);
        if libm::fabs(norm - 1.0) > tol {
            return Err(invalid(format!("vector ({x}, {y}, {z}) has norm {norm}, expected 1 within {tol}")));
        }
        if libm::fabs(norm - 1.0) <= 4.0 * f64::EPSILON {
            return Ok(Self { x, y, z });
        }
        Ok(v)
    }

    pub fn from_array(c: [f64; 3]) -> Result<Self> {
        Self::new(c[0], c[1], c[2])
    }

    /// Polar angle `theta` measured from +z, azimuth `phi` from +x.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = (libm::sin(theta), libm::cos(theta));
        let (sp, cp) = (libm::sin(phi), libm::cos(phi));
        Self::scaled(st * cp, st * sp, ct, libm::sqrt(st * st * (cp * cp + sp * sp) + ct * ct))
    }

    /// Point on the equator (the x–y plane) at azimuth `angle`.
    pub fn in_plane(angle: f64) -> Self {
        Self::from_spherical(PI / 2.0, angle)
    }

    fn scaled(x: f64, y: f64, z: f64, norm: f64) -> Self {
        Self { x: x / norm, y: y / norm, z: z / norm }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(&self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.x * self.x + self.y * self.y + self.z * self.z)
    }

    /// Inner product, clamped to `[-1, 1]`.
    pub fn dot(&self, other: &Self) -> f64 {
        let d = self.x * other.x + self.y * other.y + self.z * other.z;
        d.clamp(-1.0, 1.0)
    }

    /// Some unit vector orthogonal to `self`.
    pub fn orthogonal(&self) -> Self {
        // Cross with the coordinate axis least aligned with self.
        let axis = if libm::fabs(self.x) <= libm::fabs(self.y) && libm::fabs(self.x) <= libm::fabs(self.z) {
            Self::X
        } else if libm::fabs(self.y) <= libm::fabs(self.z) {
            Self::Y
        } else {
            Self::Z
        };
        self.cross(&axis).expect("least-aligned axis is never parallel")
    }

    /// Normalized cross product; fails when the inputs are (anti)parallel.
    pub fn cross(&self, other: &Self) -> Result<Self> {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }
}

impl core::ops::Neg for UnitVector3 {
    type Output = Self;

    fn neg(self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }
}

/// Euclidean inner product of two unit vectors, clamped to `[-1, 1]`.
pub fn dot(a: &UnitVector3, b: &UnitVector3) -> f64 {
    a.dot(b)
}

/// Uniform point on S² from a normalized triple of standard normals.
pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> UnitVector3 {
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let y: f64 = rng.sample(StandardNormal);
        let z: f64 = rng.sample(StandardNormal);
        let norm = libm::sqrt(x * x + y * y + z * z);
        if norm >= MIN_NORM {
            return UnitVector3::scaled(x, y, z, norm);
        }
    }
}

/// `n` points of the Fibonacci lattice: `z_k = 1 − 2(k + ½)/n`, azimuth
/// `2π·k·φ⁻¹` reduced mod 2π before the trig calls.
pub fn sphere_grid(n: usize) -> Result<Vec<UnitVector3>> {
    if n == 0 {
        return Err(invalid("sphere grid needs at least one point"));
    }
    let count = n as f64;
    Ok((0..n)
        .map(|k| {
            let kf = k as f64;
            let z = 1.0 - 2.0 * (kf + 0.5) / count;
            let turns = kf * GOLDEN_RATIO_CONJUGATE;
            let azimuth = 2.0 * PI * (turns - libm::floor(turns));
            let r = libm::sqrt((1.0 - z * z).max(0.0));
            let (x, y) = (r * libm::cos(azimuth), r * libm::sin(azimuth));
            UnitVector3::scaled(x, y, z, libm::sqrt(x * x + y * y + z * z))
        })
        .collect())
}

/// A proper rotation of R³, stored as a row-major matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    m: [[f64; 3]; 3],
}

impl Rotation {
    pub const IDENTITY: Self = Self { m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]] };

    /// Rodrigues rotation by `angle` (right-handed) about `axis`.
    pub fn from_axis_angle(axis: &UnitVector3, angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        let t = 1.0 - c;
        let [x, y, z] = axis.to_array();
        Self {
            m: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    /// Uniformly random axis, uniform angle in `[0, 2π)`. Not Haar-uniform,
    /// which is fine for invariance checks.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let axis = random_unit_vector(rng);
        let angle = rng.random::<f64>() * 2.0 * PI;
        Self::from_axis_angle(&axis, angle)
    }

    pub fn apply(&self, v: &UnitVector3) -> UnitVector3 {
        let [x, y, z] = v.to_array();
        let r = |row: &[f64; 3]| row[0] * x + row[1] * y + row[2] * z;
        let (rx, ry, rz) = (r(&self.m[0]), r(&self.m[1]), r(&self.m[2]));
        UnitVector3::scaled(rx, ry, rz, libm::sqrt(rx * rx + ry * ry + rz * rz))
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let mut m = [[0.0; 3]; 3];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.m[i][k] * other.m[k][j]).sum();
            }
        }
        Self { m }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use proptest::prelude::*;

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&UnitVector3::X, &UnitVector3::X), 1.0);
        assert_eq!(dot(&UnitVector3::X, &UnitVector3::Y), 0.0);
        assert_eq!(dot(&UnitVector3::X, &-UnitVector3::X), -1.0);
    }

    #[test]
    fn construction_rejects_degenerate_input() {
        assert!(UnitVector3::new(0.0, 0.0, 0.0).is_err());
        assert!(UnitVector3::new(f64::NAN, 0.0, 1.0).is_err());
        assert!(UnitVector3::from_unit(2.0, 0.0, 0.0, 1e-9).is_err());
        let v = UnitVector3::from_unit(0.6, 0.8, 1e-12, 1e-9).unwrap();
        assert!((v.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn random_vector_from_fixed_seed_is_unit() {
        let mut rng = RngSeed::new(7, 0).stream();
        let v = random_unit_vector(&mut rng);
        assert!((v.norm() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn random_vectors_are_isotropic() {
        let mut rng = RngSeed::new(2024, 3).stream();
        let n = 100_000;
        let mut sum = [0.0f64; 3];
        let mut upper = 0usize;
        for _ in 0..n {
            let v = random_unit_vector(&mut rng);
            for (s, c) in sum.iter_mut().zip(v.to_array()) {
                *s += c;
            }
            if v.z() > 0.0 {
                upper += 1;
            }
        }
        let mean_norm = sum.iter().map(|s| (s / n as f64).powi(2)).sum::<f64>().sqrt();
        assert!(mean_norm <= 0.02, "mean vector norm {mean_norm}");
        let frac = upper as f64 / n as f64;
        assert!((0.49..=0.51).contains(&frac), "upper fraction {frac}");
    }

    #[test]
    fn grid_examples() {
        assert!(sphere_grid(0).is_err());
        let one = sphere_grid(1).unwrap();
        assert_eq!(one.len(), 1);
        assert!(one[0].z().abs() < 1.0);
        for p in sphere_grid(100).unwrap() {
            assert!((p.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn grid_averages_dot_to_zero() {
        let grid = sphere_grid(1000).unwrap();
        let mut rng = RngSeed::new(11, 0).stream();
        for _ in 0..50 {
            let a = random_unit_vector(&mut rng);
            let mean = grid.iter().map(|u| u.dot(&a)).sum::<f64>() / grid.len() as f64;
            assert!(mean.abs() <= 0.01, "grid mean {mean}");
        }
    }

    #[test]
    fn grid_is_bitwise_deterministic() {
        let a = sphere_grid(257).unwrap();
        let b = sphere_grid(257).unwrap();
        for (p, q) in a.iter().zip(&b) {
            for (x, y) in p.to_array().iter().zip(q.to_array()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn orthogonal_is_orthogonal() {
        for v in sphere_grid(64).unwrap() {
            assert!(v.dot(&v.orthogonal()).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn dot_is_symmetric_and_rotation_invariant(seed in any::<u64>()) {
            let mut rng = RngSeed::new(seed, 0).stream();
            let u = random_unit_vector(&mut rng);
            let a = random_unit_vector(&mut rng);
            let r = Rotation::random(&mut rng);
            prop_assert_eq!(dot(&u, &a), dot(&a, &u));
            prop_assert!((dot(&r.apply(&u), &r.apply(&a)) - dot(&u, &a)).abs() <= 1e-12);
        }

        #[test]
        fn constructed_vectors_are_unit(x in -1e3..1e3f64, y in -1e3..1e3f64, z in -1e3..1e3f64) {
            if let Ok(v) = UnitVector3::new(x, y, z) {
                prop_assert!((v.norm() - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn spherical_constructor_is_unit(theta in 0.0..PI, phi in -10.0..10.0f64) {
            prop_assert!((UnitVector3::from_spherical(theta, phi).norm() - 1.0).abs() <= 1e-12);
        }
    }
}
