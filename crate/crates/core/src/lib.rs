//! Numerical laboratory for higher-order Jacobi operators of the neutral
//! metrics `g_psi` on `R^{2p}` and their products with flat space.
//!
//! The crate builds the metric from a polynomial 2-tensor `psi`, evaluates its
//! curvature in closed form (with an independent finite-difference oracle),
//! samples nondegenerate subspaces of prescribed signature, and checks the
//! rank and Jordan-form behaviour of `J(pi)` across those samples.

pub mod cli;
pub mod curvature;
pub mod error;
pub mod grassmann;
pub mod polynomial;
pub mod product;
pub mod pseudo_linalg;
pub mod psi_fields;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
