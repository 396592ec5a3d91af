use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::Cumulative;
use crate::error::{Error, Result};
use crate::grid::{GridPoint, ValueGrid};
use crate::oracle::ApproxOracle;

/// A measured `(index, value)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub index: usize,
    pub point: GridPoint,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateSense {
    Below,
    BelowOrEqual,
}

/// Marks basis states whose value register lies below a threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkedPredicate {
    pub threshold: f64,
    pub sense: PredicateSense,
}

impl MarkedPredicate {
    pub fn below(threshold: f64) -> Self {
        Self {
            threshold,
            sense: PredicateSense::Below,
        }
    }

    pub fn below_or_equal(threshold: f64) -> Self {
        Self {
            threshold,
            sense: PredicateSense::BelowOrEqual,
        }
    }

    /// Marks everything.
    pub fn always() -> Self {
        Self::below_or_equal(f64::INFINITY)
    }

    pub fn matches(&self, value: f64) -> bool {
        match self.sense {
            PredicateSense::Below => value < self.threshold,
            PredicateSense::BelowOrEqual => value <= self.threshold,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    index: usize,
    point: GridPoint,
}

/// Measurement statistics of `Hide * V * Uniform |0>`: weight `row_i(y) / n`
/// on every `(i, y)`, with hidden rows shifted up by 2.
///
/// Entries are kept sorted by value so that every threshold predicate marks
/// a prefix.
#[derive(Clone, Debug)]
pub struct SuperposedEstimate {
    grid: ValueGrid,
    n: usize,
    entries: Vec<Entry>,
    weights: Vec<f64>,
    sampler: Cumulative,
    hidden: BTreeSet<usize>,
}

/// Builds the state for `oracle` with the indices in `hidden` offset by 2.
pub fn prepare_state(oracle: &ApproxOracle, hidden: &BTreeSet<usize>) -> Result<SuperposedEstimate> {
    let n = oracle.n();
    if let Some(&bad) = hidden.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    let grid = oracle.grid();
    let offset = grid.hide_offset();
    let mut atoms: Vec<(Entry, f64)> = Vec::new();
    for (index, row) in oracle.rows().iter().enumerate() {
        let shift = if hidden.contains(&index) { offset } else { 0 };
        atoms.extend(row.atoms().map(|(y, w)| {
            (
                Entry {
                    index,
                    point: y + shift,
                },
                w / n as f64,
            )
        }));
    }
    atoms.sort_by_key(|(e, _)| (e.point, e.index));
    let (entries, weights): (Vec<_>, Vec<_>) = atoms.into_iter().unzip();
    let sampler = Cumulative::new(&weights);
    Ok(SuperposedEstimate {
        grid,
        n,
        entries,
        weights,
        sampler,
        hidden: hidden.clone(),
    })
}

impl SuperposedEstimate {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> ValueGrid {
        self.grid
    }

    pub fn hidden(&self) -> &BTreeSet<usize> {
        &self.hidden
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of `(index, value)` entries with nonzero weight.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.sampler.total()
    }

    /// Iterates `(index, value, weight)` in ascending value order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.entries
            .iter()
            .zip(&self.weights)
            .map(|(e, &w)| (e.index, self.grid.value(e.point), w))
    }

    /// Number of leading entries marked by `pred`.
    pub(crate) fn marked_count(&self, pred: &MarkedPredicate) -> usize {
        self.entries
            .partition_point(|e| pred.matches(self.grid.value(e.point)))
    }

    /// Total weight of entries satisfying `pred`.
    pub fn marked_mass(&self, pred: &MarkedPredicate) -> f64 {
        self.marked_mass_prefix(self.marked_count(pred))
    }

    pub(crate) fn marked_mass_prefix(&self, split: usize) -> f64 {
        if split == self.entries.len() {
            return 1.0;
        }
        (self.sampler.mass_before(split) / self.total_mass()).clamp(0.0, 1.0)
    }

    fn sample_at(&self, k: usize) -> Sample {
        let e = self.entries[k];
        Sample {
            index: e.index,
            point: e.point,
            value: self.grid.value(e.point),
        }
    }

    /// Draw from entries `start..end` proportionally to weight.
    pub(crate) fn sample_range<R: Rng + ?Sized>(&self, rng: &mut R, start: usize, end: usize) -> Sample {
        self.sample_at(self.sampler.sample_range(rng, start, end))
    }

    /// One computational-basis measurement of the whole state.
    pub fn measure<R: Rng + ?Sized>(&self, rng: &mut R) -> Sample {
        self.sample_range(rng, 0, self.entries.len())
    }

    /// Pushforward onto the value register.
    pub fn random_variable(&self) -> RandomVariableX {
        let mut outcomes: Vec<(f64, f64)> = Vec::new();
        let total = self.total_mass();
        for (e, &w) in self.entries.iter().zip(&self.weights) {
            let x = self.grid.value(e.point);
            match outcomes.last_mut() {
                Some((last, p)) if *last == x => *p += w / total,
                _ => outcomes.push((x, w / total)),
            }
        }
        RandomVariableX { outcomes }
    }
}

/// Discrete distribution of the measured value, sorted ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomVariableX {
    outcomes: Vec<(f64, f64)>,
}

impl RandomVariableX {
    pub fn outcomes(&self) -> &[(f64, f64)] {
        &self.outcomes
    }

    /// `P[X <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        let end = self.outcomes.partition_point(|&(y, _)| y <= x);
        self.outcomes[..end].iter().map(|&(_, p)| p).sum()
    }

    /// Smallest outcome `x` with `P[X <= x] >= mass` (left-continuous inverse).
    pub fn quantile(&self, mass: f64) -> f64 {
        let mut acc = 0.0;
        for &(x, p) in &self.outcomes {
            acc += p;
            if acc >= mass - 1e-12 {
                return x;
            }
        }
        self.outcomes.last().map(|&(x, _)| x).unwrap_or(f64::NAN)
    }
}
