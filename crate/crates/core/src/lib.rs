//! Fubini-Study moment maps of projective schemes, balanced embeddings and
//! the stability of point configurations.
//!
//! The moment matrix of a scheme `X ⊂ P^n` is `∫_X z z* / |z|^2 dV`; `X` is
//! balanced when it is a multiple of the identity. [`solver`] finds group
//! elements that balance a scheme, either directly or along a continuity path
//! seeded by auxiliary points, and [`stability`] decides the stability of point
//! configurations by a counting criterion and by one-parameter subgroup weights.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod integration;
pub mod linearization;
pub mod moment_map;
pub mod projective;
pub mod schema;
pub mod solver;
pub mod stability;

pub use error::{Error, Result};
pub use integration::{CurveScheme, PointScheme, QuadratureGrid, QuadratureSettings, Scheme};
pub use moment_map::{balanced_check, lambda_t, moment_matrix, residual_t};
pub use projective::{GroupElement, HermitianMatrix, ProjPoint};
pub use solver::{continuity_run, gauge_normalize, newton_solve_at_t, Schedule, SolverConfig};
pub use stability::{chow_stability_sampled, chow_weight_points, point_set_stable, roots_of_unity_config};
