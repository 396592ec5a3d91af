//! Distribution-level simulation of quantum approximate k-minimum finding.
//!
//! Oracles are explicit per-index outcome distributions over a dyadic value
//! grid. The quantum subroutines (amplitude amplification, exponential
//! search, amplitude estimation, minimum finding, counting, amplified
//! sampling) are simulated exactly at the level of their measurement
//! statistics, with every oracle invocation charged to a [`QueryLedger`].

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod apps;
pub mod dist;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod kmin;
pub mod ledger;
pub mod oracle;
pub mod qsim;
pub mod rng;
pub mod verify;

pub use error::{Error, Result};
pub use grid::ValueGrid;
pub use ledger::QueryLedger;
pub use oracle::ApproxOracle;
