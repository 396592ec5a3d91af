//! Quantum subroutines simulated at the level of outcome distributions.
//!
//! Amplitude amplification acts on the two-dimensional span of the marked
//! and unmarked components of a [`SuperposedEstimate`], so a run with `r`
//! iterations succeeds with probability `sin^2((2r+1) theta)` and then
//! yields a draw from the corresponding conditional distribution. Estimation
//! subroutines sample their exact Fejér-kernel outcome distributions.

mod counting;
mod estimate;
mod grover;
mod minimum;
mod state;

pub use counting::{amp_samp, amp_samp_in, qcount, qcount_in};
pub use estimate::{
    amp_est, amp_est_bound, amp_est_median, median_bound, AmpEstPlan,
};
pub use grover::{bbht_search, grover_run, schedule_cap, success_probability, GroverOutcome};
pub use minimum::{find_min, find_min_budget, find_min_in, FIND_MIN_BUDGET_CONSTANT};
pub use state::{
    prepare_state, MarkedPredicate, PredicateSense, RandomVariableX, Sample, SuperposedEstimate,
};
