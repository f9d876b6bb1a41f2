//! Monte Carlo laboratory for time-changed diffusions and their weak limits.
//!
//! Simulates diffusions and time-changed Brownian motions whose
//! finite-dimensional distributions converge to possibly discontinuous
//! limits, and checks sampled paths for almost-continuity, the coupling
//! crossing inequality, one-sided Lipschitz drifts, the Lipschitz
//! conditional-expectation property and connectedness of marginal supports.
//!
//! Grids, paths and the SDE / time-change kernels are generic over the
//! scalar type ([`Real`]: `f32` or `f64`). Constructions and statistics work
//! in `f64`; the aliases below name the common instantiations.

// `!(x > 0.0)` style guards reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod examples;
pub mod grid;
pub mod parallel;
pub mod scalar;
pub mod sde;
pub mod seed;
pub mod timechange;

pub use error::{Error, Result};
pub use grid::{eval_path, make_uniform_grid};
pub use scalar::Real;
pub use seed::{derive_path_seed, PathRng, Seed};

pub type TimeGrid = grid::TimeGrid<f64>;
pub type TimeGrid32 = grid::TimeGrid<f32>;
pub type Path = grid::Path<f64>;
pub type Path32 = grid::Path<f32>;
pub type PathEnsemble = grid::PathEnsemble<f64>;
pub type PathEnsemble32 = grid::PathEnsemble<f32>;
pub type DiffusionSpec = sde::DiffusionSpec<f64>;
pub type DiffusionSpec32 = sde::DiffusionSpec<f32>;
pub type ClockSpec = timechange::ClockSpec<f64>;
pub type Clock = timechange::Clock<f64>;
