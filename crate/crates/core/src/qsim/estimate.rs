use rand::Rng;
use std::f64::consts::PI;

use super::state::{MarkedPredicate, SuperposedEstimate};
use crate::dist::{self, Cumulative};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;

/// Single-run error bound `2 pi sqrt(p(1-p)) / M + pi^2 / M^2`, which holds
/// with probability at least `8 / pi^2`.
pub fn amp_est_bound(p: f64, size: u64) -> f64 {
    let m = size as f64;
    2.0 * PI * (p * (1.0 - p)).sqrt() / m + PI * PI / (m * m)
}

/// Error bound `2 eps sqrt(p(1-p)) + eps^2` of the median-boosted estimator.
pub fn median_bound(p: f64, eps: f64) -> f64 {
    2.0 * eps * (p * (1.0 - p)).sqrt() + eps * eps
}

/// Grid size and repetition count for a median-boosted estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AmpEstPlan {
    /// Power of two `>= pi / eps_target`.
    pub size: u64,
    /// `ceil(48 ln(2 / delta))`: Hoeffding on a per-run success rate above 0.81.
    pub reps: u32,
}

impl AmpEstPlan {
    pub fn new(eps_target: f64, delta: f64) -> Result<Self> {
        if !(eps_target > 0.0 && eps_target < 1.0) {
            return Err(Error::Argument(format!("eps_target = {eps_target} outside (0, 1)")));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Argument(format!("delta = {delta} outside (0, 1)")));
        }
        let size = ((PI / eps_target).ceil() as u64).next_power_of_two().max(2);
        let reps = (48.0 * (2.0 / delta).ln()).ceil() as u32;
        Ok(Self { size, reps })
    }

    /// Ledger charge of one boosted estimate.
    pub fn calls(&self) -> u64 {
        (self.size - 1) * self.reps as u64
    }
}

fn check_size(size: u64) -> Result<()> {
    if size < 2 || !size.is_power_of_two() {
        return Err(Error::Argument(format!(
            "estimation grid size must be a power of two >= 2, got {size}"
        )));
    }
    Ok(())
}

fn estimates<R: Rng + ?Sized>(p: f64, size: u64, count: usize, rng: &mut R) -> Vec<f64> {
    let outcomes = Cumulative::new(&dist::amplitude_estimation_outcomes(size, p));
    (0..count)
        .map(|_| {
            let y = outcomes.sample(rng);
            (PI * y as f64 / size as f64).sin().powi(2)
        })
        .collect()
}

/// One amplitude-estimation run on a `size`-point grid, returning
/// `sin^2(pi y / size)` for a measured `y`. Charges `size - 1` controlled
/// Grover-iterate calls.
pub fn amp_est<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    pred: &MarkedPredicate,
    size: u64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    check_size(size)?;
    ledger.charge_controlled(size - 1);
    let p = state.marked_mass(pred);
    Ok(estimates(p, size, 1, rng)[0])
}

/// Median of `AmpEstPlan::reps` independent runs at `AmpEstPlan::size`;
/// within `median_bound(p, eps_target)` of `p` with probability `>= 1 - delta`.
pub fn amp_est_median<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    pred: &MarkedPredicate,
    eps_target: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    let plan = AmpEstPlan::new(eps_target, delta)?;
    ledger.charge_controlled(plan.calls());
    let p = state.marked_mass(pred);
    let mut runs = estimates(p, plan.size, plan.reps as usize, rng);
    runs.sort_by(f64::total_cmp);
    Ok(runs[runs.len() / 2])
}
