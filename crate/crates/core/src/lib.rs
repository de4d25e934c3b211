//! Numerics for Leggett-class hidden-variable models.
//!
//! A model attaches a pair of unit vectors `(u, v)` to every run of a
//! two-party measurement. The pair is drawn from a distribution that does
//! not depend on the measurement settings `(a, b)`, and the outcomes obey
//! Malus-law conditional means `E(A | u, v) = u·a`, `E(B | u, v) = v·b`.
//!
//! The crate is organised along the chain of the argument:
//!
//! - [`sphere`]: unit vectors, uniform sampling and Fibonacci grids on S².
//! - [`rng`]: seeded, splittable counter-based streams.
//! - [`model`]: subensemble distributions, couplings and outcome sampling.
//! - [`quantum`]: the singlet prediction and the CHSH functional.
//! - [`bounds`]: pointwise identity, conditional and averaged bounds.
//! - [`estimate`]: Monte Carlo correlation estimates with standard errors.
//! - [`certify`]: LP feasibility over atom grids with Farkas certificates,
//!   plus a settings-family optimizer.
//!
//! Everything here is `no_std` + `alloc`; file formats, the command-line
//! harness and thread fan-out live in the `leggett` crate.

#![no_std]
// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bounds;
pub mod certify;
pub mod error;
pub mod estimate;
pub mod model;
pub mod quantum;
pub mod rng;
pub mod sphere;

pub use error::{Error, Result};
