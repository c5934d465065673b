//! Pareto-front approximation by decomposition and multi-task gradient
//! descent with transfer between neighboring subproblems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod mtlnet;
pub mod problems;
pub mod scalarize;
pub mod solver;
pub mod theory;
pub mod transfer;

pub use error::{Error, Result};
pub use metrics::{hypervolume, nondominated, FrontSample};
pub use problems::{Bounds, ObjectiveSet, ProblemFamily};
pub use scalarize::{Scalarization, SmoothingParams, WeightVector};
pub use solver::{run, SolverConfig, SolverState, SubproblemSpec};
pub use transfer::{build_coeffs, TransferPlan};
