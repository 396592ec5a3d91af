//! Classical ground truth: brute-force k-minimum sets, checkers for weak and
//! strong approximate minimum index sets, and deterministic checks of the
//! probability and mass bounds the finders rely on.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{validate_oracle, ApproxOracle};
use crate::qsim::{prepare_state, MarkedPredicate};

/// Indices of `v` sorted by value, ties broken by ascending index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SortedView {
    order: Vec<usize>,
}

impl SortedView {
    pub fn new(v: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
        Self { order }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `s_j` for 1-based rank `j`.
    pub fn at_rank(&self, j: usize) -> usize {
        self.order[j - 1]
    }
}

pub fn true_k_min_indices(v: &[f64], k: usize) -> Result<BTreeSet<usize>> {
    if k > v.len() {
        return Err(Error::Argument(format!("k = {k} exceeds n = {}", v.len())));
    }
    Ok(SortedView::new(v).order()[..k].iter().copied().collect())
}

fn check_subset(v: &[f64], set: &BTreeSet<usize>) -> Result<()> {
    match set.iter().find(|&&i| i >= v.len()) {
        Some(&i) => Err(Error::IndexOutOfRange {
            index: i,
            len: v.len(),
        }),
        None => Ok(()),
    }
}

/// Weak `(|S|, eps)` check via the sorted characterization: the values of
/// `S` in ascending order are entry-wise within `[v_{s_j}, v_{s_j} + eps]`.
pub fn is_weak_set(v: &[f64], set: &BTreeSet<usize>, eps: f64) -> Result<bool> {
    check_subset(v, set)?;
    let mut ours: Vec<f64> = set.iter().map(|&i| v[i]).collect();
    ours.sort_by(f64::total_cmp);
    let sorted = SortedView::new(v);
    Ok(ours.iter().enumerate().all(|(j, &x)| {
        let floor = v[sorted.order()[j]];
        floor <= x && x <= floor + eps
    }))
}

/// Strong `(|S|, eps)` check: `max_{i in S} v_i <= v_j + eps` for every `j`
/// outside `S`.
pub fn is_strong_set(v: &[f64], set: &BTreeSet<usize>, eps: f64) -> Result<bool> {
    check_subset(v, set)?;
    let top = set.iter().map(|&i| v[i]).fold(f64::NEG_INFINITY, f64::max);
    Ok((0..v.len())
        .filter(|j| !set.contains(j))
        .all(|j| top <= v[j] + eps))
}

/// Adds `a_new` to a weak `(k, eps)` set and reports whether the result is
/// weak `(k+1, eps)`. Errors when the incrementability hypotheses fail.
pub fn check_incrementability(
    v: &[f64],
    set: &BTreeSet<usize>,
    a_new: usize,
    eps: f64,
) -> Result<bool> {
    check_subset(v, set)?;
    if a_new >= v.len() {
        return Err(Error::IndexOutOfRange {
            index: a_new,
            len: v.len(),
        });
    }
    if set.contains(&a_new) {
        return Err(Error::Precondition(format!("index {a_new} already in the set")));
    }
    if set.len() >= v.len() {
        return Err(Error::Precondition("set already covers every index".into()));
    }
    if !is_weak_set(v, set, eps)? {
        return Err(Error::Precondition("starting set is not weak".into()));
    }
    let next = v[SortedView::new(v).at_rank(set.len() + 1)];
    if v[a_new] > next + eps {
        return Err(Error::Precondition(format!(
            "v[{a_new}] = {} exceeds the (k+1)-th value {next} plus eps",
            v[a_new]
        )));
    }
    let mut grown = set.clone();
    grown.insert(a_new);
    is_weak_set(v, &grown, eps)
}

/// Reports whether a strong set is also weak; errors if it is not strong.
pub fn check_strong_implies_weak(v: &[f64], set: &BTreeSet<usize>, eps: f64) -> Result<bool> {
    if !is_strong_set(v, set, eps)? {
        return Err(Error::Precondition("set is not strong".into()));
    }
    is_weak_set(v, set, eps)
}

fn require_exact_window(oracle: &ApproxOracle, v: &[f64], eps: f64) -> Result<()> {
    let report = validate_oracle(oracle, v, eps, 0.0)?;
    if !report.valid {
        return Err(Error::Precondition(format!(
            "oracle is not ({eps}, 0)-approximate (min mass {})",
            report.min_mass
        )));
    }
    Ok(())
}

/// For an `(eps, 0)` oracle: `P[X <= v_{s_l} + eps + step/2] >= l / n`,
/// read off the exact value distribution of the unhidden state.
pub fn check_min_prob_bound(oracle: &ApproxOracle, v: &[f64], eps: f64, rank: usize) -> Result<bool> {
    require_exact_window(oracle, v, eps)?;
    let n = v.len();
    if rank == 0 || rank > n {
        return Err(Error::Argument(format!("rank {rank} outside 1..={n}")));
    }
    let x = prepare_state(oracle, &BTreeSet::new())?.random_variable();
    let edge = v[SortedView::new(v).at_rank(rank)] + eps + oracle.grid().step() / 2.0;
    Ok(x.cdf(edge) >= rank as f64 / n as f64 - 1e-12)
}

/// For an `(eps, 0)` oracle and `v_{s_k} - eps <= v_g <= v_{s_k} + 3 eps`:
/// the mass at or below `v_g - 5 eps` is at most `k / n`.
pub fn check_mass_bound(
    oracle: &ApproxOracle,
    v: &[f64],
    eps: f64,
    k: usize,
    v_g: f64,
) -> Result<bool> {
    require_exact_window(oracle, v, eps)?;
    let n = v.len();
    if k == 0 || k > n {
        return Err(Error::Argument(format!("k = {k} outside 1..={n}")));
    }
    let kth = v[SortedView::new(v).at_rank(k)];
    if !(kth - eps <= v_g && v_g <= kth + 3.0 * eps) {
        return Err(Error::Precondition(format!(
            "v_g = {v_g} outside [{}, {}]",
            kth - eps,
            kth + 3.0 * eps
        )));
    }
    let state = prepare_state(oracle, &BTreeSet::new())?;
    let a = state.marked_mass(&MarkedPredicate::below_or_equal(v_g - 5.0 * eps));
    Ok(a <= k as f64 / n as f64 + 1e-12)
}

/// `ceil(3 (ln s1 + 1) / p)` draws.
pub fn coupon_rounds(s1: usize, p: f64) -> u64 {
    if s1 == 0 {
        return 0;
    }
    (3.0 * ((s1 as f64).ln() + 1.0) / p).ceil() as u64
}

/// Draws [`coupon_rounds`] samples from a distribution giving each of `s1`
/// outcomes probability `p` and reports whether all `s1` appeared.
pub fn coupon_trial<R: Rng + ?Sized>(s1: usize, p: f64, rng: &mut R) -> Result<bool> {
    if !(p > 0.0) || s1 as f64 * p > 1.0 + 1e-12 {
        return Err(Error::Argument(format!("need 0 < p and s1 p <= 1, got s1={s1} p={p}")));
    }
    let mut seen = vec![false; s1];
    let mut missing = s1;
    for _ in 0..coupon_rounds(s1, p) {
        if missing == 0 {
            break;
        }
        let slot = (rng.gen::<f64>() / p) as usize;
        if slot < s1 && !seen[slot] {
            seen[slot] = true;
            missing -= 1;
        }
    }
    Ok(missing == 0)
}

/// Weak and strong verdicts for a returned set, with the tolerances used.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub weak: bool,
    pub weak_eps: f64,
    pub strong: bool,
    pub strong_eps: f64,
}

/// Verdicts at `2 eps + step` (weak) and `7 eps + step` (strong).
pub fn verdicts(v: &[f64], set: &BTreeSet<usize>, eps: f64, step: f64) -> Result<Verdicts> {
    let weak_eps = 2.0 * eps + step;
    let strong_eps = 7.0 * eps + step;
    Ok(Verdicts {
        weak: is_weak_set(v, set, weak_eps)?,
        weak_eps,
        strong: is_strong_set(v, set, strong_eps)?,
        strong_eps,
    })
}
