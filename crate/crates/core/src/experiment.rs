//! Monte Carlo trial runner and summary statistics.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kmin::{find_approx_strong_min, find_approx_weak_min};
use crate::ledger::QueryLedger;
use crate::oracle::ApproxOracle;
use crate::rng;
use crate::verify::{verdicts, Verdicts};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Weak,
    Strong,
}

/// Result of one seeded run of a finder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    pub trial: u64,
    pub set: BTreeSet<usize>,
    pub verdicts: Verdicts,
    /// Weak verdict for the weak finder, strong verdict for the strong one.
    pub success: bool,
    pub ledger: QueryLedger,
}

/// Finder parameters shared by every trial of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinderConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    /// Oracle precision passed to the finder and used for the verdicts.
    pub eps: f64,
    pub delta: f64,
}

impl FinderConfig {
    /// Weak or strong finder at the oracle's claimed precision.
    pub fn for_oracle(algorithm: Algorithm, oracle: &ApproxOracle, k: usize, delta: f64) -> Self {
        Self {
            algorithm,
            k,
            eps: oracle.claimed_eps(),
            delta,
        }
    }

    /// Runs the finder once on stream `trial` of `seed` and verifies the
    /// returned set against `v`.
    pub fn run(&self, oracle: &ApproxOracle, v: &[f64], seed: u64, trial: u64) -> Result<TrialOutcome> {
        let mut r = rng::stream(seed, trial);
        let mut ledger = oracle.new_ledger();
        let (k, eps, delta) = (self.k, self.eps, self.delta);
        let set = match self.algorithm {
            Algorithm::Weak => find_approx_weak_min(oracle, k, eps, delta, &mut r, &mut ledger)?.set,
            Algorithm::Strong => find_approx_strong_min(oracle, k, eps, delta, &mut r, &mut ledger)?.set,
        };
        let verdicts = verdicts(v, &set, eps, oracle.grid().step())?;
        let success = match self.algorithm {
            Algorithm::Weak => verdicts.weak,
            Algorithm::Strong => verdicts.strong,
        };
        Ok(TrialOutcome {
            seed,
            trial,
            set,
            verdicts,
            success,
            ledger,
        })
    }
}

/// `n` values drawn uniformly from `[0, 1)`.
pub fn random_values<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.gen::<f64>()).collect()
}

/// Wilson score interval for a binomial proportion at normal quantile `z`.
/// `None` when there are no trials.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Option<(f64, f64)> {
    if trials == 0 {
        return None;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    Some(((centre - half).max(0.0), (centre + half).min(1.0)))
}

/// Three-sigma acceptance floor `p - 3 sqrt(p (1 - p) / trials)` for a
/// frequency whose target probability is `p`.
pub fn acceptance_floor(p: f64, trials: u64) -> f64 {
    p - 3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 || points.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::Argument(
            "slope fit needs at least two points with positive coordinates".into(),
        ));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let m = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("slope fit needs distinct x values".into()));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// Query and success statistics at one `(n, k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub n: usize,
    pub k: usize,
    pub trials: u64,
    pub mean_queries: f64,
    /// Sample standard deviation; zero for fewer than two trials.
    pub std_queries: f64,
    pub success_rate: f64,
}

impl SweepPoint {
    /// Summarizes trials, counting queries in base units.
    pub fn from_outcomes(n: usize, k: usize, outcomes: &[TrialOutcome]) -> Result<Self> {
        if outcomes.is_empty() {
            return Err(Error::Argument("sweep point needs at least one trial".into()));
        }
        let m = outcomes.len() as f64;
        let queries: Vec<f64> = outcomes.iter().map(|o| o.ledger.total() as f64).collect();
        let mean = queries.iter().sum::<f64>() / m;
        let var = if outcomes.len() > 1 {
            queries.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (m - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            n,
            k,
            trials: outcomes.len() as u64,
            mean_queries: mean,
            std_queries: var.sqrt(),
            success_rate: outcomes.iter().filter(|o| o.success).count() as f64 / m,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<SweepPoint>,
    /// Fitted exponent of mean queries against `n` at fixed `k`.
    pub exponent: f64,
}

impl SweepSummary {
    /// Fits the exponent over points sharing one `k` and at least three
    /// distinct `n`.
    pub fn new(points: Vec<SweepPoint>) -> Result<Self> {
        let ks: BTreeSet<usize> = points.iter().map(|p| p.k).collect();
        let ns: BTreeSet<usize> = points.iter().map(|p| p.n).collect();
        if ks.len() != 1 || ns.len() < 3 {
            return Err(Error::Argument(
                "exponent fit needs one k and at least three values of n".into(),
            ));
        }
        let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.mean_queries)).collect();
        let exponent = loglog_slope(&xy)?;
        Ok(Self { points, exponent })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ValueGrid;
    use crate::oracle::build_exact_oracle;

    #[test]
    fn wilson_reference_values() {
        // 8 of 10 at z = 1.96: (0.4902, 0.9433) to four places.
        let (lo, hi) = wilson_interval(8, 10, 1.96).unwrap();
        assert!((lo - 0.4902).abs() < 1e-4 && (hi - 0.9433).abs() < 1e-4);
        assert_eq!(wilson_interval(0, 0, 1.96), None);
        let (lo, hi) = wilson_interval(5, 5, 1.96).unwrap();
        assert!(lo > 0.5 && hi == 1.0);
    }

    #[test]
    fn slope_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [64.0, 256.0, 1024.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(0.5))).collect();
        assert!((loglog_slope(&pts).unwrap() - 0.5).abs() < 1e-12);
        assert!(loglog_slope(&[(1.0, 1.0)]).is_err());
        assert!(loglog_slope(&[(2.0, 1.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn trials_are_reproducible() {
        let grid = ValueGrid::new(10).unwrap();
        let v = [0.1, 0.2, 0.3, 0.4, 0.5];
        let o = build_exact_oracle(&v, grid).unwrap();
        let finder = FinderConfig::for_oracle(Algorithm::Strong, &o, 2, 0.1);
        let a = finder.run(&o, &v, 7, 3).unwrap();
        let b = finder.run(&o, &v, 7, 3).unwrap();
        assert_eq!(a, b);
        let point = SweepPoint::from_outcomes(5, 2, &[a.clone(), b]).unwrap();
        assert_eq!(point.std_queries, 0.0);
        assert_eq!(point.mean_queries, a.ledger.total() as f64);
    }

    #[test]
    fn summary_requires_three_sizes() {
        let p = |n: usize, q: f64| SweepPoint {
            n,
            k: 4,
            trials: 1,
            mean_queries: q,
            std_queries: 0.0,
            success_rate: 1.0,
        };
        assert!(SweepSummary::new(vec![p(64, 8.0), p(256, 16.0)]).is_err());
        let s = SweepSummary::new(vec![p(64, 8.0), p(256, 16.0), p(1024, 32.0)]).unwrap();
        assert!((s.exponent - 0.5).abs() < 1e-12);
    }
}
