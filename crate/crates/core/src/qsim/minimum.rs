use std::collections::BTreeSet;

use rand::Rng;

use super::grover::bbht_schedule;
use super::state::{prepare_state, MarkedPredicate, Sample, SuperposedEstimate};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::oracle::ApproxOracle;

/// Calls per `1/sqrt(M)` in one block of the minimum-finding budget.
///
/// Calibrated so that a single block reaches the `M`-quantile with
/// probability well above 1/2 on worst-case (single lowest entry) instances.
pub const FIND_MIN_BUDGET_CONSTANT: f64 = 8.0;

/// Total ledger calls spent by [`find_min_in`]:
/// `ceil(C / sqrt(M)) * ceil(log2(3 / delta))`.
pub fn find_min_budget(m_lower: f64, delta: f64) -> u64 {
    let block = (FIND_MIN_BUDGET_CONSTANT / m_lower.sqrt()).ceil() as u64;
    let blocks = (3.0 / delta).log2().ceil().max(1.0) as u64;
    block * blocks
}

/// Descending-threshold minimum finding: start from one measurement, then
/// repeatedly search for an entry strictly below the best value seen until
/// the budget is spent. With probability `>= 1 - delta` the returned value is
/// at most the `m_lower`-quantile of the state's value distribution.
pub fn find_min_in<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    m_lower: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<Sample> {
    if state.is_empty() {
        return Err(Error::Argument("minimum finding on an empty state".into()));
    }
    if !(m_lower > 0.0 && m_lower <= 1.0) {
        return Err(Error::Argument(format!("M = {m_lower} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("delta = {delta} outside (0, 1)")));
    }
    let budget = find_min_budget(m_lower, delta);
    ledger.charge_plain(1);
    let mut best = state.measure(rng);
    let mut left = Some(budget - 1);
    while left != Some(0) {
        let split = state.marked_count(&MarkedPredicate::below(best.value));
        if let Some(found) = bbht_schedule(state, split, rng, ledger, &mut left) {
            best = found;
        }
    }
    Ok(best)
}

/// [`find_min_in`] on `Hide(hidden) * V * Uniform`.
pub fn find_min<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    hidden: &BTreeSet<usize>,
    m_lower: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<Sample> {
    let state = prepare_state(oracle, hidden)?;
    find_min_in(&state, m_lower, delta, rng, ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ValueGrid;
    use crate::oracle::build_exact_oracle;
    use crate::rng;

    #[test]
    fn finds_quantile_of_small_vector() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&[0.3, 0.1, 0.2], grid).unwrap();
        let mut r = rng::stream(21, 0);
        let delta = 0.05;
        let trials = 500;
        let mut ok = 0;
        for _ in 0..trials {
            let mut ledger = QueryLedger::default();
            let s = find_min(&o, &BTreeSet::new(), 1.0 / 3.0, delta, &mut r, &mut ledger).unwrap();
            assert_eq!(ledger.calls(), find_min_budget(1.0 / 3.0, delta));
            if s.index == 1 {
                assert_eq!(s.value, grid.value(grid.round(0.1).unwrap()));
                ok += 1;
            }
        }
        let sigma = (delta * (1.0 - delta) / trials as f64).sqrt();
        assert!(ok as f64 / trials as f64 >= 1.0 - delta - 3.0 * sigma);
    }

    #[test]
    fn respects_hidden_indices() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&[0.1, 0.2, 0.3, 0.4, 0.5], grid).unwrap();
        let hidden = BTreeSet::from([0, 1]);
        let mut r = rng::stream(22, 0);
        let mut hits = 0;
        for _ in 0..500 {
            let mut ledger = QueryLedger::default();
            let s = find_min(&o, &hidden, 0.2, 0.05, &mut r, &mut ledger).unwrap();
            assert!(!hidden.contains(&s.index));
            hits += usize::from(s.index == 2);
        }
        assert!(hits as f64 / 500.0 >= 0.95 - 3.0 * (0.05f64 * 0.95 / 500.0).sqrt());
    }

    #[test]
    fn full_mass_is_vacuous() {
        let grid = ValueGrid::new(6).unwrap();
        let o = build_exact_oracle(&[0.5, 0.25], grid).unwrap();
        let mut r = rng::stream(23, 0);
        let mut ledger = QueryLedger::default();
        let s = find_min(&o, &BTreeSet::new(), 1.0, 0.1, &mut r, &mut ledger).unwrap();
        assert!(s.value <= 0.5);
        assert!(find_min(&o, &BTreeSet::new(), 0.0, 0.1, &mut r, &mut ledger).is_err());
    }
}
