//! Approximate k-minimum index set finders.
//!
//! The weak finder selects indices one at a time by minimum finding over the
//! not-yet-selected indices, asking at step `t` only for a value below the
//! `t/n` quantile. The strong finder runs the weak finder, estimates the
//! k-th value from it, counts and samples every index that is clearly below
//! that estimate, and keeps the `k` best fresh estimates.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::ValueGrid;
use crate::ledger::QueryLedger;
use crate::oracle::{query_sample, ApproxOracle};
use crate::qsim::{amp_samp_in, find_min, prepare_state, qcount_in};

/// Selected-index set whose members are hidden (+2 value offset) from
/// subsequent minimum finding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QSet {
    capacity: usize,
    members: BTreeSet<usize>,
}

impl QSet {
    pub fn initialize(capacity: usize) -> Self {
        Self {
            capacity,
            members: BTreeSet::new(),
        }
    }

    pub fn add(&mut self, index: usize) -> Result<bool> {
        if index >= self.capacity {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.capacity,
            });
        }
        Ok(self.members.insert(index))
    }

    pub fn contains(&self, index: usize) -> bool {
        self.members.contains(&index)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Indices to hide when preparing the next state.
    pub fn hidden(&self) -> &BTreeSet<usize> {
        &self.members
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakIteration {
    pub t: usize,
    pub m_lower: f64,
    pub index: usize,
    pub value: f64,
    /// Ledger calls spent by this iteration's minimum finding.
    pub calls: u64,
    /// Set when minimum finding returned an already selected index and the
    /// lowest unselected index was taken instead.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub fallback: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakRunTranscript {
    pub k: usize,
    pub iterations: Vec<WeakIteration>,
    pub set: BTreeSet<usize>,
}

/// Per-call oracle failure small enough to leave the finders' `delta`
/// guarantee intact: `delta / (100 n d sqrt(k d))`, `d` the grid size.
pub fn negligible_delta0(delta: f64, n: usize, k: usize, grid: ValueGrid) -> f64 {
    let d = grid.size() as f64;
    delta / (100.0 * n as f64 * d * (k as f64 * d).sqrt())
}

fn check_args(oracle: &ApproxOracle, k: usize, eps: f64, delta: f64) -> Result<()> {
    let n = oracle.n();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} outside 1..={n}")));
    }
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::Argument(format!("eps = {eps} outside [0, 1/2)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Argument(format!("delta = {delta} outside (0, 1)")));
    }
    Ok(())
}

/// Weak `(k, 2 eps)`-approximate minimum index set when `oracle` is
/// `(eps, 0)`-approximate and every minimum finding succeeds (overall
/// probability `>= 1 - delta`).
pub fn find_approx_weak_min<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    k: usize,
    eps: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<WeakRunTranscript> {
    check_args(oracle, k, eps, delta)?;
    let n = oracle.n();
    let mut selected = QSet::initialize(n);
    let mut iterations = Vec::with_capacity(k);
    for t in (1..=k).rev() {
        let m_lower = t as f64 / n as f64;
        let before = ledger.calls();
        let found = find_min(oracle, selected.hidden(), m_lower, delta / k as f64, rng, ledger)?;
        let mut index = found.index;
        let fallback = selected.contains(index);
        if fallback {
            index = (0..n).find(|&i| !selected.contains(i)).expect("fewer than n selected");
        }
        selected.add(index)?;
        iterations.push(WeakIteration {
            t,
            m_lower,
            index,
            value: found.value,
            calls: ledger.calls() - before,
            fallback,
        });
    }
    Ok(WeakRunTranscript {
        k,
        iterations,
        set: selected.members,
    })
}

/// One fresh measurement per index in `set`.
pub fn approx_query_set<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    set: &BTreeSet<usize>,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<BTreeMap<usize, f64>> {
    set.iter()
        .map(|&i| Ok((i, query_sample(oracle, i, rng, ledger)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrongRunTranscript {
    pub weak: WeakRunTranscript,
    pub s0: BTreeSet<usize>,
    pub v_prime: BTreeMap<usize, f64>,
    pub v_g: f64,
    /// Sampling threshold `v_g - 5 eps`.
    pub u: f64,
    pub ell: usize,
    /// Number of amplified samples drawn.
    pub samples: u64,
    /// Samples that came back empty (search failure).
    pub failed_samples: u64,
    pub r: BTreeSet<usize>,
    pub v_tilde: BTreeMap<usize, f64>,
    pub set: BTreeSet<usize>,
}

/// Number of amplified samples for count `ell`, set size `k` and failure
/// budget `delta`: `ceil(3 max(ell,1) (ln max(k,2) + 1)) * ceil(log2(10/delta))`,
/// or zero when `ell = 0`.
pub fn sample_count(ell: usize, k: usize, delta: f64) -> u64 {
    if ell == 0 {
        return 0;
    }
    let batch = (3.0 * ell as f64 * ((k.max(2) as f64).ln() + 1.0)).ceil() as u64;
    let batches = (10.0 / delta).log2().ceil() as u64;
    batch * batches
}

/// The `k` smallest estimates, ties by ascending index.
fn k_smallest(estimates: &BTreeMap<usize, f64>, k: usize) -> BTreeSet<usize> {
    let mut ranked: Vec<(usize, f64)> = estimates.iter().map(|(&i, &x)| (i, x)).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(i, _)| i).collect()
}

/// Strong `(k, 7 eps)`-approximate minimum index set when `oracle` is
/// `(eps, 0)`-approximate, with probability `>= 1 - delta`.
pub fn find_approx_strong_min<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    k: usize,
    eps: f64,
    delta: f64,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<StrongRunTranscript> {
    check_args(oracle, k, eps, delta)?;
    let n = oracle.n();
    let weak = find_approx_weak_min(oracle, k, eps, delta / 10.0, rng, ledger)?;
    let s0 = weak.set.clone();
    let v_prime = approx_query_set(oracle, &s0, rng, ledger)?;
    let v_g = v_prime.values().copied().fold(f64::NEG_INFINITY, f64::max);
    let u = v_g - 5.0 * eps;

    let state = prepare_state(oracle, &BTreeSet::new())?;
    let ell = qcount_in(&state, u, delta / 10.0, rng, ledger)?;
    let samples = sample_count(ell, k, delta);
    let sample_delta = delta / (5.0 * n as f64 * ell.max(1) as f64);
    let mut r = BTreeSet::new();
    let mut failed_samples = 0;
    for _ in 0..samples {
        match amp_samp_in(&state, u, sample_delta, rng, ledger)? {
            Some(s) => {
                r.insert(s.index);
            }
            None => failed_samples += 1,
        }
    }

    let candidates: BTreeSet<usize> = r.union(&s0).copied().collect();
    let v_tilde = approx_query_set(oracle, &candidates, rng, ledger)?;
    let set = k_smallest(&v_tilde, k);
    Ok(StrongRunTranscript {
        weak,
        s0,
        v_prime,
        v_g,
        u,
        ell,
        samples,
        failed_samples,
        r,
        v_tilde,
        set,
    })
}
