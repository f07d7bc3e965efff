//! Tabular episodic-RL laboratory.
//!
//! The crate bundles everything needed to run controlled regret experiments on
//! small time-inhomogeneous MDPs under the bounded-total-reward setting
//! (every trajectory's summed reward is at most the horizon `H`):
//!
//! - [`mdp`] — the MDP data model, trajectory sampling, and structural
//!   validation.
//! - [`solver`] — exact dynamic-programming solvers for optimal values, gap
//!   quantities, and total-variance quantities, with brute-force
//!   policy-enumeration oracles for cross-validation.
//! - [`learner`] — the Monotonic Value Propagation (MVP) learner: empirical
//!   model statistics, a three-term exploration bonus, and min-clamped Q
//!   backups recomputed every episode.
//! - [`envs`] — instance generators, including a hard family that separates
//!   conditional from unconditional total variance.
//! - [`harness`] — seeded experiment runs with exact per-episode regret,
//!   optimism and surplus diagnostics, seed aggregation, and log-growth fits.
//! - [`bounds`] — evaluators for the theoretical upper- and lower-bound
//!   expressions so regret curves can be overlaid against theory.
//! - [`cli`] — the file-driven front door (`gen`, `solve`, `run`, `bounds`).

pub mod bounds;
pub mod cli;
pub mod envs;
pub mod harness;
pub mod learner;
pub mod mdp;
pub mod solver;

/// Dense `[h][s]` table of reals.
pub type Table2 = Vec<Vec<f64>>;
/// Dense `[h][s][a]` table of reals.
pub type Table3 = Vec<Vec<Vec<f64>>>;
/// Dense `[h][s][a]` table of visit counts.
pub type CountTable = Vec<Vec<Vec<u64>>>;
