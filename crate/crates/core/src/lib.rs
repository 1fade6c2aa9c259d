//! Rating engine for large tournaments of software agents.
//!
//! Three families of estimators share one tournament-graph representation:
//!
//! - [`elo_update`]: single-player classic Elo and Self-Consistent Elo (SC-Elo)
//!   updates, plus three ways of estimating the rating uncertainty.
//! - [`batch_fit`]: simultaneous posterior-maximum-likelihood (PML) fitting of
//!   every rating in a tournament, with frozen anchors and per-player `K`.
//! - [`lls_fit`]: linear least squares on pairwise log-odds advantages, which
//!   separates statistical from structural (non-additive) uncertainty.
//!
//! Supporting modules cover probability arithmetic, asymmetric (two-role)
//! tournaments, margin-of-victory and ECF scoring, a seeded tournament
//! simulator, and risk-averse bet sizing.
//!
//! The per-sweep work inside the fitters and the simulator's evaluation run on
//! rayon when the `parallel` feature (on by default) is enabled. Every sweep
//! reads only the previous iterate, so sequential and parallel execution give
//! bit-identical results.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymmetric;
pub mod batch_fit;
pub mod betting;
pub mod elo_update;
mod error;
pub mod exec;
pub mod io;
pub mod lls_fit;
pub mod probability;
pub mod scoring;
pub mod simulator;
pub mod tournament;

pub use error::{Error, Result};
pub use exec::Execution;
pub use tournament::{
    build_graph, ComparisonEdge, Constants, GameRecord, Identity, Outcome, PlayerId,
    RatingEstimate, TournamentGraph, BETA, DEFAULT_MEAN, DEFAULT_SIGMA,
};
