//! Numerical laboratory for the integrable lattice Heisenberg chain and the
//! focusing Ablowitz–Ladik lattice, connected by the discrete Hasimoto
//! transform.
//!
//! Module map:
//! - [`lattice`]: windows, fields, rotations, trajectories, random streams, file formats.
//! - [`sampling`]: exact samplers for the white-noise and Gibbs measures and Haar rotations.
//! - [`hasimoto`]: the (θ, γ) and parallel-frame forms of the transform.
//! - [`dynamics`]: vector fields, conserved quantities, adaptive integration, frames.
//! - [`brackets`]: exact polynomial Poisson algebra and numeric spin brackets.
//! - [`experiments`]: Monte Carlo invariance and convergence experiments.

pub mod error;
pub mod experiments;
pub mod brackets;
pub mod dynamics;
pub mod hasimoto;
pub mod lattice;
pub mod quadrature;
pub mod sampling;
pub mod stats;

pub use error::{LatticeError, Result};
