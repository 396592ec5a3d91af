use std::collections::BTreeSet;

use rand::Rng;

use super::estimate::amp_est_median;
use super::grover::bbht_search;
use super::state::{prepare_state, MarkedPredicate, Sample, SuperposedEstimate};
use crate::error::{Error, Result};
use crate::ledger::QueryLedger;
use crate::oracle::ApproxOracle;

/// Count-scale floor for the second estimation stage. Below `n a = 16` the
/// coarse first-stage count is too noisy to size the second stage.
const MIN_COARSE_COUNT: f64 = 16.0;

fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("delta = {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Estimates `n a`, `a` the mass at or below `u`, as an integer `l` with
/// `n a <= l <= n a + 2` (probability `>= 1 - delta` when `n a >= 16`).
///
/// Two median-boosted estimation stages, each given half of `delta`: a coarse
/// one at precision `min(1/sqrt(n), 1/2)`, then a fine one at precision
/// `1/(8 sqrt(n l0))` with `l0` the coarse count (floored at 16). Returns 0
/// when the fine estimate is exactly zero, and clamps to `[0, n]`.
pub fn qcount_in<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    u: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<usize> {
    check_delta(delta)?;
    let n = state.n() as f64;
    let pred = MarkedPredicate::below_or_equal(u);
    let coarse_eps = (1.0 / n.sqrt()).min(0.5);
    let coarse = amp_est_median(state, &pred, coarse_eps, delta / 2.0, rng, ledger)?;
    let coarse_count = (n * coarse).max(MIN_COARSE_COUNT);
    let fine_eps = 1.0 / (8.0 * (coarse_count * n).sqrt());
    let fine = amp_est_median(state, &pred, fine_eps, delta / 2.0, rng, ledger)?;
    if fine == 0.0 {
        return Ok(0);
    }
    let count = (n * fine + 0.5).ceil().clamp(0.0, n);
    Ok(count as usize)
}

/// [`qcount_in`] on `V * Uniform` with nothing hidden.
pub fn qcount<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    u: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<usize> {
    let state = prepare_state(oracle, &BTreeSet::new())?;
    qcount_in(&state, u, delta, rng, ledger)
}

/// Amplified sampling from the component with value at most `u`: with
/// probability `>= 1 - delta` returns a draw with `P[(i, y)] = w(i, y) / a`.
/// Returns `None` when nothing lies at or below `u` or the search failed.
pub fn amp_samp_in<R: Rng + ?Sized>(
    state: &SuperposedEstimate,
    u: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<Option<Sample>> {
    check_delta(delta)?;
    Ok(bbht_search(state, &MarkedPredicate::below_or_equal(u), delta, rng, ledger))
}

/// [`amp_samp_in`] on `V * Uniform` with nothing hidden.
pub fn amp_samp<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    u: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<Option<Sample>> {
    let state = prepare_state(oracle, &BTreeSet::new())?;
    amp_samp_in(&state, u, delta, rng, ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ValueGrid;
    use crate::oracle::{build_adversarial_oracle, build_exact_oracle, AdversarialMode};
    use crate::rng;

    const EXAMPLE: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

    #[test]
    fn count_everything_and_nothing() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        let mut r = rng::stream(31, 0);
        let mut ledger = QueryLedger::default();
        assert_eq!(qcount(&o, 1.1, 0.1, &mut r, &mut ledger).unwrap(), 5);
        assert_eq!(qcount(&o, 0.05, 0.1, &mut r, &mut ledger).unwrap(), 0);
        assert_eq!(qcount(&o, -0.3, 0.1, &mut r, &mut ledger).unwrap(), 0);
    }

    #[test]
    fn small_mass_fallback_on_example() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        let mut r = rng::stream(32, 0);
        for _ in 0..50 {
            let mut ledger = QueryLedger::default();
            let l = qcount(&o, 0.25, 0.1, &mut r, &mut ledger).unwrap();
            assert!((2..=4).contains(&l), "l = {l}");
        }
    }

    #[test]
    fn amp_samp_conditioning() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        let mut r = rng::stream(33, 0);
        let mut ledger = QueryLedger::default();
        let mut counts = [0usize; 5];
        let draws = 10_000;
        for _ in 0..draws {
            let s = amp_samp(&o, 0.25, 0.01, &mut r, &mut ledger).unwrap().unwrap();
            counts[s.index] += 1;
        }
        assert_eq!(counts[0] + counts[1], draws);
        // Binomial(10^4, 1/2): sigma = 50.
        assert!((counts[0] as f64 - 5000.0).abs() <= 150.0);
        assert!(amp_samp(&o, 0.05, 0.1, &mut r, &mut ledger).unwrap().is_none());
    }

    #[test]
    fn amp_samp_everything_marked_is_one_measurement() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        let mut r = rng::stream(34, 0);
        let mut ledger = QueryLedger::default();
        assert!(amp_samp(&o, 1.0, 0.1, &mut r, &mut ledger).unwrap().is_some());
        assert_eq!(ledger.calls(), 1);
    }

    #[test]
    fn amp_samp_split_only_low_atoms() {
        let grid = ValueGrid::new(9).unwrap();
        let v = [0.3, 0.6];
        let o = build_adversarial_oracle(&v, 0.05, 0.0, AdversarialMode::Split, grid).unwrap();
        let mut r = rng::stream(35, 0);
        let mut ledger = QueryLedger::default();
        for _ in 0..1000 {
            let s = amp_samp(&o, 0.4, 0.01, &mut r, &mut ledger).unwrap().unwrap();
            assert_eq!(s.index, 0);
            assert!(s.value <= 0.4);
        }
    }
}
