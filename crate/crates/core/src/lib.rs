//! Structure-preserving numerical toolkit: generating-function symplectic
//! integrators, Lie–Poisson Hamilton–Jacobi steppers (rigid body and
//! semidirect-product field dynamics), a discrete pseudodifferential symbol
//! algebra, a Madelung/Schrödinger Hamiltonian equivalence check, the
//! integrable peakon system, and an optimal-control formulation of residual
//! network training driven by the same symplectic machinery.
//!
//! The `geomint` binary exposes each experiment as a reproducible subcommand;
//! see the crate README for the catalogue.

pub mod artifact;
pub mod cli;
pub mod error;
pub mod genfunc;
pub mod grid;
pub mod lphj;
pub mod madelung;
pub mod peakon;
pub mod phase;
pub mod registry;
pub mod resnet;
pub mod rng;
pub mod spectral;
pub mod symbols;
pub mod validation;

pub use error::{Error, Result};
