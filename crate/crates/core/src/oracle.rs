//! Approximate value oracles as explicit per-index outcome distributions.
//!
//! Querying index `i` yields a grid value drawn from row `i`; an oracle is
//! `(eps, delta)`-approximate for `v` when every row puts mass at least
//! `1 - delta` within `eps` of `v_i`. Rows store probabilities (squared
//! amplitude magnitudes); every subroutine here depends on amplitudes only
//! through those.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dist::{self, Cumulative};
use crate::error::{Error, Result};
use crate::grid::{GridPoint, ValueGrid};
use crate::ledger::QueryLedger;

const ROW_TOLERANCE: f64 = 1e-12;

/// One row of an oracle: outcome distribution for a single index.
#[derive(Clone, Debug)]
pub struct Row {
    points: Vec<GridPoint>,
    weights: Vec<f64>,
    sampler: Cumulative,
}

impl Row {
    /// Builds a row from `(point, weight)` pairs. Points are sorted and
    /// merged; zero weights are dropped.
    pub fn new(mut atoms: Vec<(GridPoint, f64)>) -> Result<Self> {
        if atoms.iter().any(|&(_, w)| !(w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("row weights must be finite and nonnegative".into()));
        }
        atoms.sort_by_key(|&(y, _)| y);
        let mut points = Vec::with_capacity(atoms.len());
        let mut weights: Vec<f64> = Vec::with_capacity(atoms.len());
        for (y, w) in atoms {
            if w == 0.0 {
                continue;
            }
            if points.last() == Some(&y) {
                *weights.last_mut().unwrap() += w;
            } else {
                points.push(y);
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > ROW_TOLERANCE {
            return Err(Error::Domain(format!("row sums to {total}, expected 1")));
        }
        let sampler = Cumulative::new(&weights);
        Ok(Self {
            points,
            weights,
            sampler,
        })
    }

    pub fn point_mass(y: GridPoint) -> Self {
        Self::new(vec![(y, 1.0)]).expect("point mass is a valid row")
    }

    pub fn atoms(&self) -> impl Iterator<Item = (GridPoint, f64)> + '_ {
        self.points.iter().copied().zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Distribution of the median of `reps` independent draws from this row.
    pub fn median(&self, reps: u32) -> Self {
        let weights = dist::median_distribution(&self.weights, reps);
        let atoms = self.points.iter().copied().zip(weights).collect();
        Self::new(atoms).expect("median distribution stays normalised")
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GridPoint {
        self.points[self.sampler.sample(rng)]
    }
}

/// An `(eps, delta)`-approximate oracle over `n` indices.
#[derive(Clone, Debug)]
pub struct ApproxOracle {
    grid: ValueGrid,
    rows: Vec<Row>,
    claimed_eps: f64,
    claimed_delta: f64,
    base_cost_per_call: u64,
}

impl ApproxOracle {
    pub fn from_rows(
        grid: ValueGrid,
        rows: Vec<Row>,
        claimed_eps: f64,
        claimed_delta: f64,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Argument("oracle needs at least one index".into()));
        }
        if let Some(&top) = rows.iter().filter_map(|r| r.points.last()).max() {
            if top >= grid.hide_offset() {
                return Err(Error::Domain(format!(
                    "grid point {top} overlaps the hidden range"
                )));
            }
        }
        Ok(Self {
            grid,
            rows,
            claimed_eps,
            claimed_delta,
            base_cost_per_call: 1,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn grid(&self) -> ValueGrid {
        self.grid
    }

    pub fn row(&self, i: usize) -> Result<&Row> {
        self.rows.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.rows.len(),
        })
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn claimed_eps(&self) -> f64 {
        self.claimed_eps
    }

    pub fn claimed_delta(&self) -> f64 {
        self.claimed_delta
    }

    pub fn base_cost_per_call(&self) -> u64 {
        self.base_cost_per_call
    }

    pub fn with_base_cost(mut self, base_cost_per_call: u64) -> Self {
        self.base_cost_per_call = base_cost_per_call;
        self
    }

    /// Fresh ledger priced in this oracle's base-query units.
    pub fn new_ledger(&self) -> QueryLedger {
        QueryLedger::new(self.base_cost_per_call)
    }

    fn with_claims(mut self, eps: f64, delta: f64) -> Self {
        self.claimed_eps = eps;
        self.claimed_delta = delta;
        self
    }
}

pub(crate) fn check_unit_values(v: &[f64], allow_one: bool) -> Result<()> {
    if v.is_empty() {
        return Err(Error::Argument("value vector is empty".into()));
    }
    for (i, &x) in v.iter().enumerate() {
        let ok = if allow_one {
            (0.0..=1.0).contains(&x)
        } else {
            (0.0..1.0).contains(&x)
        };
        if !ok {
            return Err(Error::Domain(format!("v[{i}] = {x} outside the unit interval")));
        }
    }
    Ok(())
}

/// Point mass at the nearest grid point to each `v_i`; a `(step/2, 0)` oracle.
pub fn build_exact_oracle(v: &[f64], grid: ValueGrid) -> Result<ApproxOracle> {
    check_unit_values(v, true)?;
    let rows = v
        .iter()
        .map(|&x| grid.round(x).map(Row::point_mass))
        .collect::<Result<Vec<_>>>()?;
    ApproxOracle::from_rows(grid, rows, grid.step() / 2.0, 0.0)
}

/// Row for `precision_bits`-bit phase estimation of `phase`, median-combined
/// over `reps` runs and placed on `grid` (which must be at least as fine).
pub(crate) fn fejer_row(phase: f64, precision_bits: u32, reps: u32, grid: ValueGrid) -> Row {
    let size = 1u64 << precision_bits;
    let scale = 1u32 << (grid.bits() - precision_bits);
    let atoms = dist::phase_estimation_outcomes(size, phase)
        .into_iter()
        .enumerate()
        .map(|(y, w)| (y as GridPoint * scale, w))
        .collect();
    let row = Row::new(atoms).expect("phase estimation outcomes are normalised");
    row.median(reps)
}

fn check_fejer_args(precision_bits: u32, reps: u32, grid: ValueGrid) -> Result<()> {
    if precision_bits < 2 {
        return Err(Error::Argument(format!(
            "precision bits must be at least 2, got {precision_bits}"
        )));
    }
    if reps.is_multiple_of(2) {
        return Err(Error::Argument(format!("median repetitions must be odd, got {reps}")));
    }
    // step <= eps / 8 with eps = 2^(1 - t).
    if grid.bits() < precision_bits + 2 {
        return Err(Error::Argument(format!(
            "grid of {} bits too coarse for {precision_bits}-bit estimates (need {})",
            grid.bits(),
            precision_bits + 2
        )));
    }
    Ok(())
}

/// Oracle whose row `i` is the exact outcome distribution of `t`-bit phase
/// estimation of `v_i`, median-combined over `reps` independent runs.
///
/// The claimed precision is `2^(1-t)`; the claimed failure probability is the
/// exact largest out-of-window mass, which the median makes decay as
/// `exp(-2 reps (q - 1/2)^2)` with single-run window mass `q >= 8/pi^2`.
pub fn build_fejer_oracle(
    v: &[f64],
    precision_bits: u32,
    reps: u32,
    grid: ValueGrid,
) -> Result<ApproxOracle> {
    check_fejer_args(precision_bits, reps, grid)?;
    check_unit_values(v, false)?;
    let rows = v
        .iter()
        .map(|&x| fejer_row(x, precision_bits, reps, grid))
        .collect();
    let eps = fejer_eps(precision_bits);
    let oracle = ApproxOracle::from_rows(grid, rows, eps, 0.0)?;
    let report = validate_oracle(&oracle, v, eps, 0.0)?;
    let inner_queries = reps as u64 * ((1u64 << precision_bits) - 1);
    Ok(oracle
        .with_claims(eps, report.max_out_mass)
        .with_base_cost(inner_queries))
}

/// Precision of `t`-bit phase estimation as an approximate oracle.
pub fn fejer_eps(precision_bits: u32) -> f64 {
    (1.0 - precision_bits as f64).exp2()
}

/// Smallest odd repetition count whose median-combined phase-estimation
/// rows all have out-of-window mass at most `delta0`.
pub fn fejer_reps_for(v: &[f64], precision_bits: u32, grid: ValueGrid, delta0: f64) -> Result<u32> {
    check_fejer_args(precision_bits, 1, grid)?;
    check_unit_values(v, false)?;
    let single: Vec<Row> = v
        .iter()
        .map(|&x| fejer_row(x, precision_bits, 1, grid))
        .collect();
    smallest_reps(&single, v, fejer_eps(precision_bits), grid, delta0)
}

/// Smallest odd `r` such that the median of `r` draws from every row of
/// `single` lands within `eps` of the matching `v_i` with mass `>= 1 - target`.
pub(crate) fn smallest_reps(
    single: &[Row],
    v: &[f64],
    eps: f64,
    grid: ValueGrid,
    target: f64,
) -> Result<u32> {
    const MAX_REPS: u32 = 4001;
    let half_width = eps + grid.step() / 2.0;
    let mut reps = 1;
    while reps <= MAX_REPS {
        let worst = single
            .iter()
            .zip(v)
            .map(|(row, &x)| out_of_window(&row.median(reps), grid, x, half_width))
            .fold(0.0, f64::max);
        if worst <= target {
            return Ok(reps);
        }
        reps += 2;
    }
    Err(Error::Argument(format!(
        "no odd repetition count up to {MAX_REPS} reaches delta0 = {target}"
    )))
}

/// Stress patterns that saturate the approximate-oracle definition.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialMode {
    /// In-window mass at `v_i - eps` (clamped to 0).
    EdgeLow,
    /// In-window mass at `v_i + eps`.
    EdgeHigh,
    /// In-window mass split evenly between `v_i - eps` and `v_i + eps`.
    Split,
    /// In-window mass at `v_i`.
    Leak,
}

/// Adversarial oracle: `1 - delta` of every row placed per `mode`, and the
/// remaining `delta` leaked to a point at distance at least 1/2 from `v_i`.
pub fn build_adversarial_oracle(
    v: &[f64],
    eps: f64,
    delta: f64,
    mode: AdversarialMode,
    grid: ValueGrid,
) -> Result<ApproxOracle> {
    check_unit_values(v, true)?;
    if !(eps >= 0.0) || eps + grid.step() / 2.0 >= 0.5 {
        return Err(Error::Argument(format!("eps = {eps} leaves no room below 1/2")));
    }
    if eps > 0.0 && grid.step() > eps / 8.0 {
        return Err(Error::Argument(format!(
            "grid step {} too coarse for eps = {eps}",
            grid.step()
        )));
    }
    if !(0.0..0.5).contains(&delta) {
        return Err(Error::Argument(format!("delta = {delta} outside [0, 1/2)")));
    }
    let keep = 1.0 - delta;
    let rows = v
        .iter()
        .map(|&x| {
            let low = grid.round((x - eps).max(0.0))?;
            let high = grid.round(x + eps)?;
            let mut atoms = match mode {
                AdversarialMode::EdgeLow => vec![(low, keep)],
                AdversarialMode::EdgeHigh => vec![(high, keep)],
                AdversarialMode::Split => vec![(low, keep / 2.0), (high, keep / 2.0)],
                AdversarialMode::Leak => vec![(grid.round(x)?, keep)],
            };
            if delta > 0.0 {
                let far = if x >= 0.5 { 0.0 } else { 1.0 };
                atoms.push((grid.round(far)?, delta));
            }
            Row::new(atoms)
        })
        .collect::<Result<Vec<_>>>()?;
    ApproxOracle::from_rows(grid, rows, eps, delta)
}

/// Per-index in-window masses of an oracle against reference values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleValidationReport {
    pub eps: f64,
    pub delta: f64,
    /// `eps` widened by half a grid step to absorb rounding.
    pub window_half_width: f64,
    pub in_window_mass: Vec<f64>,
    pub min_mass: f64,
    /// Largest out-of-window mass, summed directly (not as `1 - mass`).
    pub max_out_mass: f64,
    pub valid: bool,
}

impl OracleValidationReport {
    pub fn is_valid(&self) -> bool {
        self.valid
    }
}

pub(crate) fn out_of_window(row: &Row, grid: ValueGrid, center: f64, half_width: f64) -> f64 {
    row.atoms()
        .filter(|&(y, _)| (grid.value(y) - center).abs() > half_width + ROW_TOLERANCE)
        .map(|(_, w)| w)
        .sum()
}

/// Checks that every row of `oracle` places mass at least `1 - delta` within
/// `eps + step/2` of the corresponding `v_i`.
pub fn validate_oracle(
    oracle: &ApproxOracle,
    v: &[f64],
    eps: f64,
    delta: f64,
) -> Result<OracleValidationReport> {
    if v.len() != oracle.n() {
        return Err(Error::DimensionMismatch {
            expected: oracle.n(),
            got: v.len(),
        });
    }
    let grid = oracle.grid();
    let half_width = eps + grid.step() / 2.0;
    let mut in_window_mass = Vec::with_capacity(v.len());
    let mut max_out_mass: f64 = 0.0;
    for (row, &center) in oracle.rows().iter().zip(v) {
        let inside: f64 = row
            .atoms()
            .filter(|&(y, _)| (grid.value(y) - center).abs() <= half_width + ROW_TOLERANCE)
            .map(|(_, w)| w)
            .sum();
        in_window_mass.push(inside);
        max_out_mass = max_out_mass.max(out_of_window(row, grid, center, half_width));
    }
    let min_mass = in_window_mass.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(OracleValidationReport {
        eps,
        delta,
        window_half_width: half_width,
        valid: min_mass >= 1.0 - delta - ROW_TOLERANCE,
        in_window_mass,
        min_mass,
        max_out_mass,
    })
}

/// Replaces every row by the distribution of the median of `reps`
/// independent draws from it. Costs `reps` calls per call.
pub fn median_boost(oracle: &ApproxOracle, reps: u32) -> Result<ApproxOracle> {
    if reps.is_multiple_of(2) {
        return Err(Error::Argument(format!("median repetitions must be odd, got {reps}")));
    }
    let delta = oracle.claimed_delta();
    if delta >= 1.0 / 3.0 {
        return Err(Error::Precondition(format!(
            "median boosting needs delta < 1/3, oracle claims {delta}"
        )));
    }
    let rows = oracle.rows().iter().map(|r| r.median(reps)).collect();
    let hoeffding = (-2.0 * reps as f64 * (0.5 - delta).powi(2)).exp();
    let boosted = ApproxOracle::from_rows(
        oracle.grid(),
        rows,
        oracle.claimed_eps(),
        delta.min(hoeffding),
    )?;
    Ok(boosted.with_base_cost(oracle.base_cost_per_call() * reps as u64))
}

/// One measurement of the value register after querying index `i`.
pub fn query_sample<R: Rng + ?Sized>(
    oracle: &ApproxOracle,
    i: usize,
    rng: &mut R,
    ledger: &mut QueryLedger,
) -> Result<f64> {
    let row = oracle.row(i)?;
    ledger.charge_plain(1);
    Ok(oracle.grid().value(row.sample(rng)))
}

/// Oracle kinds accepted in oracle spec files.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleKind {
    Exact,
    Fejer,
    Adversarial,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleParams {
    /// Phase-estimation precision bits (`fejer`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u32>,
    /// Median repetitions (`fejer`); chosen from `delta0` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<AdversarialMode>,
}

/// Oracle description as stored in JSON spec files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub n: usize,
    pub grid_bits: u32,
    pub kind: OracleKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub params: OracleParams,
}

impl OracleSpec {
    pub fn grid(&self) -> Result<ValueGrid> {
        ValueGrid::new(self.grid_bits)
    }

    pub fn values(&self) -> Result<&[f64]> {
        let v = self
            .v
            .as_deref()
            .ok_or_else(|| Error::Argument("oracle spec has no value vector".into()))?;
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: v.len(),
            });
        }
        Ok(v)
    }

    /// The `(eps, delta)` pair the built oracle is checked against.
    pub fn target(&self, oracle: &ApproxOracle) -> (f64, f64) {
        match self.kind {
            OracleKind::Exact => (oracle.claimed_eps(), 0.0),
            OracleKind::Fejer => (
                oracle.claimed_eps(),
                self.params.delta0.unwrap_or(oracle.claimed_delta()),
            ),
            OracleKind::Adversarial => (
                self.params.eps.unwrap_or(oracle.claimed_eps()),
                self.params.delta.unwrap_or(oracle.claimed_delta()),
            ),
        }
    }

    pub fn build(&self) -> Result<ApproxOracle> {
        let grid = self.grid()?;
        let v = self.values()?;
        match self.kind {
            OracleKind::Exact => build_exact_oracle(v, grid),
            OracleKind::Fejer => {
                let t = self
                    .params
                    .t
                    .ok_or_else(|| Error::Argument("fejer oracle needs params.t".into()))?;
                let r = match (self.params.r, self.params.delta0) {
                    (Some(r), _) => r,
                    (None, Some(delta0)) => fejer_reps_for(v, t, grid, delta0)?,
                    (None, None) => {
                        return Err(Error::Argument(
                            "fejer oracle needs params.r or params.delta0".into(),
                        ))
                    }
                };
                build_fejer_oracle(v, t, r, grid)
            }
            OracleKind::Adversarial => {
                let eps = self.params.eps.unwrap_or(0.0);
                let delta = self.params.delta.unwrap_or(0.0);
                let mode = self.params.mode.unwrap_or(AdversarialMode::Leak);
                build_adversarial_oracle(v, eps, delta, mode, grid)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    const EXAMPLE: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];

    #[test]
    fn sampling_matches_row_distribution() {
        let grid = ValueGrid::new(8).unwrap();
        let o = build_fejer_oracle(&[0.3141], 6, 3, grid).unwrap();
        let row = o.row(0).unwrap();
        let draws = 100_000;
        let mut counts = std::collections::BTreeMap::new();
        let mut r = rng::stream(41, 0);
        let mut ledger = QueryLedger::default();
        for _ in 0..draws {
            let x = query_sample(&o, 0, &mut r, &mut ledger).unwrap();
            *counts.entry(grid.round(x).unwrap()).or_insert(0u32) += 1;
        }
        assert_eq!(ledger.calls(), draws as u64);
        let tv: f64 = row
            .atoms()
            .map(|(y, w)| (w - counts.get(&y).copied().unwrap_or(0) as f64 / draws as f64).abs())
            .sum::<f64>()
            / 2.0;
        let support = row.len() as f64;
        assert!(counts.keys().all(|y| row.atoms().any(|(p, _)| p == *y)));
        assert!(tv <= 5.0 * (support / draws as f64).sqrt(), "tv {tv}");
    }

    fn rows_normalised(o: &ApproxOracle) -> bool {
        o.rows()
            .iter()
            .all(|r| (r.atoms().map(|(_, w)| w).sum::<f64>() - 1.0).abs() <= 1e-12)
    }

    #[test]
    fn exact_oracle_on_example() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        for (row, &x) in o.rows().iter().zip(&EXAMPLE) {
            let atoms: Vec<_> = row.atoms().collect();
            assert_eq!(atoms.len(), 1);
            assert!((grid.value(atoms[0].0) - x).abs() <= 2f64.powi(-11));
        }
        assert_eq!(o.claimed_eps(), grid.step() / 2.0);
        assert_eq!(o.claimed_delta(), 0.0);
    }

    #[test]
    fn exact_oracle_zero_vector_and_rounding() {
        let grid = ValueGrid::new(3).unwrap();
        let o = build_exact_oracle(&[0.0, 0.0], grid).unwrap();
        assert!(o.rows().iter().all(|r| r.atoms().eq([(0, 1.0)])));
        let o = build_exact_oracle(&[0.37], grid).unwrap();
        assert_eq!(grid.value(o.rows()[0].atoms().next().unwrap().0), 0.375);
        assert!(matches!(build_exact_oracle(&[1.2], grid), Err(Error::Domain(_))));
    }

    #[test]
    fn fejer_on_grid_phase_is_point_mass() {
        let grid = ValueGrid::new(8).unwrap();
        for r in [1, 5] {
            let o = build_fejer_oracle(&[5.0 / 64.0], 6, r, grid).unwrap();
            let atoms: Vec<_> = o.rows()[0].atoms().collect();
            assert_eq!(atoms.len(), 1);
            assert_eq!(grid.value(atoms[0].0), 5.0 / 64.0);
        }
    }

    // Frozen from summing the kernel over the window directly (see test below).
    #[test]
    fn fejer_one_third_window_mass() {
        let grid = ValueGrid::new(8).unwrap();
        let v = [1.0 / 3.0];
        let single = build_fejer_oracle(&v, 6, 1, grid).unwrap();
        let rep = validate_oracle(&single, &v, fejer_eps(6), 0.19).unwrap();
        assert!(rep.min_mass >= 8.0 / std::f64::consts::PI.powi(2));
        let boosted = build_fejer_oracle(&v, 6, 15, grid).unwrap();
        let rep = validate_oracle(&boosted, &v, fejer_eps(6), 0.01).unwrap();
        assert!(rep.min_mass >= 0.99 && rep.valid);
        assert!(matches!(
            build_fejer_oracle(&v, 6, 4, grid),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn fejer_window_mass_matches_direct_kernel_sum() {
        // Independent brute-force sum of sin^2(N pi d) / (N sin(pi d))^2.
        let n = 64.0_f64;
        let v = 1.0 / 3.0;
        let eps = 2.0 / n;
        let mut brute = 0.0;
        for y in 0..64 {
            let d = y as f64 / n - v;
            if d.abs() <= eps {
                let p = ((n * std::f64::consts::PI * d).sin() / (n * (std::f64::consts::PI * d).sin())).powi(2);
                brute += p;
            }
        }
        let grid = ValueGrid::new(8).unwrap();
        let o = build_fejer_oracle(&[v], 6, 1, grid).unwrap();
        let rep = validate_oracle(&o, &[v], eps, 0.5).unwrap();
        assert!((rep.min_mass - brute).abs() < 1e-12);
    }

    #[test]
    fn fejer_t8_r9_valid_at_five_percent() {
        let grid = ValueGrid::new(10).unwrap();
        let v = [0.0123, 0.5, 1.0 / 3.0, 0.77777, 0.2];
        let o = build_fejer_oracle(&v, 8, 9, grid).unwrap();
        assert!(rows_normalised(&o));
        assert!(validate_oracle(&o, &v, 2f64.powi(-7), 0.05).unwrap().valid);
        assert!(o.claimed_delta() <= (-2.0 * 9.0 * (8.0 / std::f64::consts::PI.powi(2) - 0.5f64).powi(2)).exp());
    }

    #[test]
    fn fejer_requires_fine_grid() {
        let grid = ValueGrid::new(7).unwrap();
        assert!(build_fejer_oracle(&[0.3], 6, 1, grid).is_err());
        assert!(build_fejer_oracle(&[0.3], 1, 1, ValueGrid::new(8).unwrap()).is_err());
    }

    #[test]
    fn reps_search_meets_target() {
        let grid = ValueGrid::new(9).unwrap();
        let v = [0.1, 0.45, 0.93];
        let r = fejer_reps_for(&v, 7, grid, 1e-6).unwrap();
        let o = build_fejer_oracle(&v, 7, r, grid).unwrap();
        assert!(o.claimed_delta() <= 1e-6);
        if r > 1 {
            let weaker = build_fejer_oracle(&v, 7, r - 2, grid).unwrap();
            assert!(weaker.claimed_delta() > 1e-6);
        }
    }

    #[test]
    fn adversarial_modes() {
        let grid = ValueGrid::new(9).unwrap();
        let v = [0.1, 0.6, 0.0, 1.0];
        let eps = 0.02;
        for mode in [AdversarialMode::EdgeLow, AdversarialMode::EdgeHigh, AdversarialMode::Split] {
            let o = build_adversarial_oracle(&v, eps, 0.0, mode, grid).unwrap();
            let rep = validate_oracle(&o, &v, eps, 0.0).unwrap();
            assert!(rep.valid);
            assert_eq!(rep.min_mass, 1.0);
        }
        let o = build_adversarial_oracle(&v, eps, 0.1, AdversarialMode::Leak, grid).unwrap();
        let rep = validate_oracle(&o, &v, eps, 0.1).unwrap();
        assert!(rep.valid);
        assert!((rep.min_mass - 0.9).abs() < 1e-15);
        assert!(!validate_oracle(&o, &v, eps, 0.05).unwrap().valid);
        let o = build_adversarial_oracle(&v, eps, 0.2, AdversarialMode::Split, grid).unwrap();
        assert!((validate_oracle(&o, &v, eps, 0.2).unwrap().min_mass - 0.8).abs() < 1e-15);
    }

    #[test]
    fn edge_high_atom_position() {
        let grid = ValueGrid::new(9).unwrap();
        let o = build_adversarial_oracle(&[0.3], 0.02, 0.0, AdversarialMode::EdgeHigh, grid).unwrap();
        let atoms: Vec<_> = o.rows()[0].atoms().collect();
        assert_eq!(atoms, vec![(grid.round(0.32).unwrap(), 1.0)]);
    }

    #[test]
    fn split_sample_mean_near_value() {
        let grid = ValueGrid::new(9).unwrap();
        let o = build_adversarial_oracle(&[0.4], 0.02, 0.0, AdversarialMode::Split, grid).unwrap();
        let mut r = rng::stream(3, 0);
        let mut ledger = QueryLedger::default();
        let draws = 10_000;
        let mut low = 0;
        let mut sum = 0.0;
        for _ in 0..draws {
            let x = query_sample(&o, 0, &mut r, &mut ledger).unwrap();
            sum += x;
            if x < 0.4 {
                low += 1;
            }
        }
        assert_eq!(ledger.calls_plain, draws);
        // Binomial(10^4, 1/2): sigma = 50.
        assert!((low as f64 - 5000.0).abs() <= 150.0);
        // Each draw is 0.4 +- ~0.02, so the mean has sigma ~ 2e-4.
        assert!((sum / draws as f64 - 0.4).abs() <= 3.0 * 0.02 / 100.0 + grid.step());
    }

    #[test]
    fn validation_dimension_mismatch() {
        let grid = ValueGrid::new(6).unwrap();
        let o = build_exact_oracle(&[0.1, 0.2], grid).unwrap();
        assert!(matches!(
            validate_oracle(&o, &[0.1], 0.01, 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn exact_oracle_validates_at_half_step() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        let rep = validate_oracle(&o, &EXAMPLE, grid.step() / 2.0, 0.0).unwrap();
        assert!(rep.valid && rep.in_window_mass.iter().all(|&m| m == 1.0));
    }

    #[test]
    fn median_boost_identity_and_binomial() {
        let grid = ValueGrid::new(9).unwrap();
        let o = build_adversarial_oracle(&[0.2], 0.02, 0.2, AdversarialMode::Leak, grid).unwrap();
        let same = median_boost(&o, 1).unwrap();
        assert!(same.rows()[0].atoms().eq(o.rows()[0].atoms()));
        let boosted = median_boost(&o, 3).unwrap();
        let rep = validate_oracle(&boosted, &[0.2], 0.02, 0.2).unwrap();
        assert!((rep.min_mass - 0.896).abs() < 1e-12);
        assert_eq!(boosted.base_cost_per_call(), 3);
        assert!(median_boost(&o, 2).is_err());
    }

    #[test]
    fn median_boost_leak_thirty_percent() {
        let grid = ValueGrid::new(9).unwrap();
        let v = [0.2, 0.7];
        let o = build_adversarial_oracle(&v, 0.02, 0.3, AdversarialMode::Leak, grid).unwrap();
        let boosted = median_boost(&o, 31).unwrap();
        assert!(validate_oracle(&boosted, &v, 0.02, 0.01).unwrap().valid);
        assert!(boosted.claimed_delta() <= (-2.0 * 31.0 * 0.04f64).exp() + 1e-15);
        let too_noisy = build_adversarial_oracle(&v, 0.02, 0.4, AdversarialMode::Leak, grid).unwrap();
        assert!(matches!(median_boost(&too_noisy, 3), Err(Error::Precondition(_))));
    }

    #[test]
    fn query_sample_deterministic_for_point_mass() {
        let grid = ValueGrid::new(10).unwrap();
        let o = build_exact_oracle(&EXAMPLE, grid).unwrap();
        let mut r = rng::stream(1, 1);
        let mut ledger = QueryLedger::default();
        for _ in 0..100 {
            let x = query_sample(&o, 1, &mut r, &mut ledger).unwrap();
            assert!((x - 0.2).abs() <= grid.step() / 2.0);
        }
        assert!(matches!(
            query_sample(&o, 5, &mut r, &mut ledger),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert_eq!(ledger.calls_plain, 100);
    }

    #[test]
    fn spec_file_round_trip_and_build() {
        let text = r#"{"n":3,"grid_bits":9,"kind":"fejer","v":[0.1,0.5,0.9],"params":{"t":7,"delta0":1e-4}}"#;
        let spec: OracleSpec = serde_json::from_str(text).unwrap();
        let o = spec.build().unwrap();
        let (eps, delta) = spec.target(&o);
        assert!(validate_oracle(&o, spec.values().unwrap(), eps, delta).unwrap().valid);
        let back: OracleSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn builders_normalised(v in prop::collection::vec(0.0f64..0.999, 1..6), t in 3u32..7, half_reps in 0u32..6) {
                let grid = ValueGrid::new(t + 2).unwrap();
                let o = build_fejer_oracle(&v, t, 2 * half_reps + 1, grid).unwrap();
                prop_assert!(rows_normalised(&o));
                let e = build_exact_oracle(&v, grid).unwrap();
                prop_assert!(validate_oracle(&e, &v, grid.step() / 2.0, 0.0).unwrap().valid);
            }

            #[test]
            fn median_never_lowers_majority_mass(q in 0.5f64..1.0, half_reps in 0u32..20) {
                let grid = ValueGrid::new(9).unwrap();
                let o = build_adversarial_oracle(&[0.25, 0.75], 0.02, 1.0 - q, AdversarialMode::Split, grid);
                prop_assume!(o.is_ok() && q > 2.0 / 3.0);
                let o = o.unwrap();
                let boosted = median_boost(&o, 2 * half_reps + 1).unwrap();
                let before = validate_oracle(&o, &[0.25, 0.75], 0.02, 0.5).unwrap();
                let after = validate_oracle(&boosted, &[0.25, 0.75], 0.02, 0.5).unwrap();
                prop_assert!(after.min_mass >= before.min_mass - 1e-12);
            }
        }
    }
}
