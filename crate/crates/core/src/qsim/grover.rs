use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::state::{MarkedPredicate, Sample, SuperposedEstimate};
use crate::ledger::QueryLedger;

/// Result of one fixed-iteration amplification run followed by measurement.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroverOutcome {
    pub success: bool,
    pub sample: Option<Sample>,
    pub iterations_used: u64,
}

/// `sin^2((2r + 1) arcsin(sqrt p))`.
pub fn success_probability(p: f64, iterations: u64) -> f64 {
    let theta = p.clamp(0.0, 1.0).sqrt().asin();
    ((2 * iterations + 1) as f64 * theta).sin().powi(2)
}

/// Charges `r + 1` plain and `r` adjoint calls: one preparation, then `r`
/// reflections about the prepared state.
pub fn grover_run<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    pred: &MarkedPredicate,
    iterations: u64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> GroverOutcome {
    let split = state.marked_count(pred);
    grover_run_split(state, split, iterations, rng, ledger)
}

pub(crate) fn grover_run_split<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    split: usize,
    iterations: u64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> GroverOutcome {
    ledger.charge_plain(iterations + 1);
    ledger.charge_adjoint(iterations);
    let len = state.len();
    let success = if split == 0 {
        false
    } else if split == len {
        true
    } else {
        let p = state.marked_mass_prefix(split);
        rng.gen::<f64>() < success_probability(p, iterations)
    };
    let sample = match (success, split) {
        (true, _) => Some(state.sample_range(rng, 0, split)),
        (false, s) if s < len => Some(state.sample_range(rng, s, len)),
        _ => None,
    };
    GroverOutcome {
        success,
        sample,
        iterations_used: iterations,
    }
}

/// Largest iteration count an exponential-search schedule will try:
/// `ceil(pi/4 * sqrt(n d))`, the optimal count for a single marked basis state.
pub fn schedule_cap(state: &SuperposedEstimate) -> f64 {
    (PI / 4.0 * (state.n() as f64 * state.grid().size() as f64).sqrt()).ceil()
}

const GROWTH: f64 = 6.0 / 5.0;
const ROUNDS_AT_CAP: u32 = 4;

/// One exponential-search schedule: iteration counts drawn uniformly below a
/// bound growing by 6/5 per round up to the cap, followed by a few rounds at
/// the cap. Stops early on success or when `budget` (in ledger calls) runs out.
pub(crate) fn bbht_schedule<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    split: usize,
    rng: &mut R,
    ledger: &mut QueryLedger,
    budget: &mut Option<u64>,
) -> Option<Sample> {
    let cap = schedule_cap(state);
    let mut bound: f64 = 1.0;
    let mut rounds_at_cap = 0;
    loop {
        let mut iterations = rng.gen_range(0..bound.ceil() as u64);
        if let Some(left) = budget {
            if *left == 0 {
                return None;
            }
            iterations = iterations.min((*left - 1) / 2);
            *left -= 2 * iterations + 1;
        }
        let outcome = grover_run_split(state, split, iterations, rng, ledger);
        if outcome.success {
            return outcome.sample;
        }
        if bound >= cap {
            rounds_at_cap += 1;
            if rounds_at_cap >= ROUNDS_AT_CAP {
                return None;
            }
        }
        bound = (bound * GROWTH).min(cap);
    }
}

/// Exponential search for a marked entry when the marked mass is unknown.
///
/// Repeats the schedule `ceil(log2(1/delta))` times; each schedule succeeds
/// with probability at least 1/2 whenever the marked mass is at least that of
/// a single basis state.
pub fn bbht_search<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    pred: &MarkedPredicate,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Option<Sample> {
    let split = state.marked_count(pred);
    let schedules = (1.0 / delta.clamp(f64::MIN_POSITIVE, 1.0)).log2().ceil().max(1.0) as u64;
    (0..schedules).find_map(|_| bbht_schedule(state, split, rng, ledger, &mut None))
}
