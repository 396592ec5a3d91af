//! Application pipelines: minimum expectation values over state/observable
//! pairs and lowest energies of a Hamiltonian with known eigenbasis, both
//! reduced to strong approximate minimum finding on a simulated estimation
//! oracle.

mod energy;
mod expectation;
pub mod hermitian;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use energy::{
    build_energy_oracle, find_k_ground_energies, precision_bits_for, SpectrumInstance,
};
pub use expectation::{
    build_expectation_oracle, expectation_kernel_size, expectation_value, find_k_min_expectations,
    ExpectationInstance, ExpectationPair,
};
pub use hermitian::HermitianMatrix;

use crate::kmin::StrongRunTranscript;
use crate::ledger::QueryLedger;
use crate::oracle::ApproxOracle;

/// Per-call failure probability for application oracles when none is given:
/// `delta / (100 n^3 sqrt(k))`.
pub fn default_delta0(delta: f64, n: usize, k: usize) -> f64 {
    delta / (100.0 * (n as f64).powi(3) * (k as f64).sqrt())
}

/// Outcome of one application run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexSetResult {
    pub set: BTreeSet<usize>,
    /// Strong-set verdict against the exact values at `tolerance`.
    pub success: bool,
    pub tolerance: f64,
    pub oracle_eps: f64,
    pub oracle_delta: f64,
    pub grid_bits: u32,
    pub base_cost_per_call: u64,
    pub ledger: QueryLedger,
    pub transcript: StrongRunTranscript,
}

impl IndexSetResult {
    fn new(
        oracle: &ApproxOracle,
        transcript: StrongRunTranscript,
        ledger: QueryLedger,
        success: bool,
        tolerance: f64,
    ) -> Self {
        Self {
            set: transcript.set.clone(),
            success,
            tolerance,
            oracle_eps: oracle.claimed_eps(),
            oracle_delta: oracle.claimed_delta(),
            grid_bits: oracle.grid().bits(),
            base_cost_per_call: oracle.base_cost_per_call(),
            ledger,
            transcript,
        }
    }
}
