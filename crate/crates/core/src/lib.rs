//! Causal survival analysis in two steps.
//!
//! A causal tree partitions a cohort by heterogeneous treatment effect on
//! observed survival days. Within each selected leaf, one random survival
//! forest is grown per treatment arm; subtracting the two predicted curves of
//! a patient gives that patient's differential survival curve.
//!
//! The crate is organised bottom-up:
//!
//! - [`survival`]: Kaplan–Meier, log-rank, curve arithmetic, RMST, C-index.
//! - [`forest`]: log-rank split survival trees and bootstrap forests.
//! - [`causal_tree`]: honest causal tree, leaf paths, leaf selection.
//! - [`pipeline`]: the end-to-end two step procedure.
//! - [`datagen`]: synthetic cohorts with closed-form ground truth.
//! - [`io`] and [`cli`]: CSV ingestion, configuration, result emission.

pub mod causal_tree;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod forest;
pub mod io;
pub mod pipeline;
pub mod seed;
pub mod survival;

pub use error::{Error, Result};
pub use survival::{Arm, DifferenceCurve, LogRankResult, SurvivalCurve, SurvivalRecord};
