//! Ordinal ranking recovery by spectral seriation and the semi-supervised
//! regression machinery built on top of it.
//!
//! Module map:
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`linalg`] | symmetric matrices, cyclic Jacobi eigensolver, Laplacians, norms |
//! | [`seriation`] | plain and labeled-anchored spectral seriation |
//! | [`rankdiff`] | the `rk` operator and blackbox ranking-loss gradients |
//! | [`mfsm`] | variance-based feature selection (DP heuristic and exact oracle) |
//! | [`bounds`] | perturbation tolerances and empirical robustness checks |
//! | [`model`] | two-layer regression MLP, the four losses, Adam |
//! | [`train`] | the training loop with memory-based selection |
//! | [`experiment`] | labeled-fraction sweeps against the supervised baseline |
//! | [`data`] | GP coefficients, 1-D elliptic solver, datasets |
//! | [`metrics`] | MAE and R² |
//!
//! Ranks are ascending everywhere: rank 0 belongs to the smallest score.

pub mod bounds;
pub mod data;
pub mod error;
pub mod experiment;
pub mod instances;
pub mod linalg;
pub mod metrics;
pub mod mfsm;
pub mod model;
pub mod rankdiff;
pub mod seriation;
pub mod train;

pub use error::{Error, Result};
pub use linalg::{EigenDecomposition, SymMatrix};
pub use seriation::{MixedBatchLayout, RankVector};
