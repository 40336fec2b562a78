//! Attack/defense equilibrium toolkit for locally linear binary classifiers.
//!
//! A classifier `f` is summarised at each data point by a [`LinearizationRecord`]
//! (its score and input gradient). From those records this crate derives the
//! per-point robust sets, plays the single-shot zero-sum game between an
//! additive attacker and a constant-vector defender, and computes the
//! defense vector that maximises empirical robust coverage.
//!
//! Module map:
//!
//! - [`geometry`]: perturbation budget, robust-set half-spaces, FGM direction, `phi_n`.
//! - [`game`]: per-point utility, attack resolution (none / FGM / PGD / fixed), simulation.
//! - [`solve`]: projected gradient ascent on the clamp surrogate of `phi_n`.
//! - [`oracle`]: exact small-instance maximiser and 2D arrangement region counting.
//! - [`synthetic`]: analytic classifiers, Gaussian data and closed-form `phi`.
//! - [`experiments`]: game tables, generalization-rate study, region checks.

pub mod error;
pub mod experiments;
pub mod game;
pub mod geometry;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod solve;
pub mod synthetic;

pub use error::{Error, Result};
pub use game::{AttackSpec, DefenseSpec, GameReport};
pub use geometry::{Budget, Dataset, HalfSpace, LinearizationRecord};
pub use oracle::OracleResult;
pub use solve::{SolveConfig, SolveResult};
pub use synthetic::{GaussianSpec, SyntheticModel};
