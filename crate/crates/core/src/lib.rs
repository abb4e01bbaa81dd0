//! Inexact, scaled and adaptive FISTA for composite convex problems, with a
//! total-variation / Kullback-Leibler Poisson deblurring model.
//!
//! - [`linops`]: DCT-diagonalized reflexive blur and the forward-difference gradient.
//! - [`metrics`]: split-gradient diagonal metrics and their threshold schedule.
//! - [`problems`]: the KL + TV objective, noise simulation, phantoms and PGM files.
//! - [`prox`]: the duality-gap certified inexact proximal map.
//! - [`solver`]: the outer accelerated loop with adaptive backtracking.

pub mod error;
pub mod grid;
pub mod linops;
pub mod metrics;
pub mod problems;
pub mod prox;
pub mod solver;

pub use error::{Error, Result};
pub use grid::{DualField, ImageGrid};
