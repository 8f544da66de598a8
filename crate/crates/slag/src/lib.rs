//! Numerical laboratory for non-C¹ viscosity solutions of the special
//! Lagrangian equation `F(D²u) = Σ arctan λ_i(D²u) = c` in three dimensions.
//!
//! The crate builds the explicit convex potential Φ, extracts the compact
//! convex sublevel set K of its Lagrangian angle, extends Φ across ∂K by the
//! Cauchy jet of the exterior solution, and studies the Legendre transform of
//! the glued potential together with a rotated variant built from a quartic
//! model solution. A monotone wide-stencil solver covers the associated
//! Dirichlet, Bellman and model free-boundary problems.

pub mod band;
pub mod config;
pub mod explicit;
pub mod freeboundary;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod par;
pub mod section3;
pub mod solver;
pub mod symtensor;
pub mod taylor;
pub mod transform;
pub mod verify;

use linalg::V3;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("point {0:?} outside the domain |x3| < 1")]
    OutOfDomain(V3),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("rotation breakdown: I - eps M is singular")]
    RotationBreakdown,
    #[error("K extraction failed along direction {0:?}: no level crossing")]
    KExtraction(V3),
    #[error("degenerate normal direction: |F_nn| = {0:e}")]
    DegenerateNormal(f64),
    #[error("point {0:?} outside the Taylor band")]
    OutOfBand(V3),
    #[error("no inverse branch found for {0:?}")]
    NoBranch(V3),
    #[error("H-map inversion failed at {0:?}")]
    HInversion(V3),
    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("config error: {0}")]
    Config(String),
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
