//! Sparse deep ReLU network estimators fit by l1-regularized empirical risk
//! minimization, with synthetic benchmarks for checking convergence rates.

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod losses;
pub mod net;
pub mod optim;
pub mod penalties;
pub mod seed;
pub mod synthetic;

pub use error::{Error, Result};
