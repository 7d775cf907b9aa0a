//! Optimal non-uniform sampling schemes for multi-dimensional parametric
//! signals.
//!
//! Given a parametric signal model (damped sinusoids, linear chirps) and a
//! set of candidate sampling points, this crate selects the subset of
//! points that minimizes weighted — optionally worst-case over a parameter
//! uncertainty grid — Cramér-Rao lower bounds on the model parameters,
//! subject to a sample budget. Selection is relaxed to continuous weights
//! and solved as a convex program; the weights are then rounded to a
//! concrete sampling schedule.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`models`] — signal models, gradients, per-sample Fisher information;
//! 2. [`fisher`] — information aggregation and CRLB evaluation;
//! 3. [`designer`] — the relaxed/epigraph design solvers, rounding, and an
//!    exhaustive oracle for small instances;
//! 4. [`estimation`] — simulation and grid-based nonlinear least squares,
//!    used to verify that the designed bounds are attained;
//! 5. [`scenario`] — end-to-end study presets, random/uniform baselines,
//!    and CSV reports.
//!
//! All computations are deterministic given the inputs and explicit seeds.

pub mod designer;
pub mod error;
pub mod estimation;
pub mod fisher;
pub mod models;
pub mod scenario;

pub use error::{Error, Result};
pub use models::{CandidateGrid, ModelKind, NoiseSpec, ParamVector, SignalModel};
