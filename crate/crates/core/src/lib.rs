//! Finite-scale computations for sofic entropy of algebraic actions.
//!
//! The crate builds sofic approximations of a few group families, models
//! actions on compact groups, enumerates and samples microstates, checks
//! local-and-empirical convergence of measure sequences, and estimates
//! topological and measure entropy, with independent oracles (Mahler
//! measure, Fuglede–Kadison determinants, Smith normal form counts).

#![forbid(unsafe_code)]

pub mod actions;
pub mod convergence;
pub mod entropy;
pub mod error;
pub mod group_core;
pub mod linalg;
pub mod microstates;
pub mod numeric;
pub mod oracles;
pub mod rng;

pub use error::{Error, Result};
