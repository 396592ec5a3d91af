//! Subcommand implementations.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use qkmin::apps::{find_k_ground_energies, find_k_min_expectations, ExpectationInstance, IndexSetResult, SpectrumInstance};
use qkmin::experiment::{acceptance_floor, wilson_interval, FinderConfig, SweepPoint, SweepSummary, TrialOutcome};
use qkmin::oracle::{validate_oracle, OracleValidationReport};
use qkmin::verify::{is_strong_set, is_weak_set, Verdicts};
use qkmin::{rng, ApproxOracle, QueryLedger};

use crate::config::{read_json, RunConfig, Task};

/// Normal quantile of the reported Wilson interval.
const WILSON_Z: f64 = 1.96;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    Invalid,
    CheckFailed,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::Invalid => 2,
            Status::CheckFailed => 3,
        }
    }
}

enum Fallback {
    Stdout,
    Stderr,
}

fn sink(path: Option<&Path>, fallback: Fallback) -> Result<Box<dyn Write>> {
    Ok(match (path, fallback) {
        (Some(p), _) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        (None, Fallback::Stdout) => Box::new(BufWriter::new(io::stdout().lock())),
        (None, Fallback::Stderr) => Box::new(io::stderr().lock()),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, fallback: Fallback, value: &T) -> Result<()> {
    let mut out = sink(path, fallback)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct LedgerTotals {
    pub plain: u64,
    pub adjoint: u64,
    pub controlled: u64,
    pub base_cost_per_call: u64,
    /// All calls in base-query units.
    pub base: u64,
}

impl From<&QueryLedger> for LedgerTotals {
    fn from(l: &QueryLedger) -> Self {
        Self {
            plain: l.calls_plain,
            adjoint: l.calls_adjoint,
            controlled: l.calls_controlled,
            base_cost_per_call: l.base_cost_per_call,
            base: l.total(),
        }
    }
}

/// One JSONL line per trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub seed: u64,
    pub set: BTreeSet<usize>,
    pub verdicts: Verdicts,
    pub success: bool,
    pub ledger: LedgerTotals,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_ms: Option<f64>,
}

impl TrialRecord {
    fn from_outcome(o: &TrialOutcome, wall_time_ms: Option<f64>) -> Self {
        Self {
            trial: o.trial,
            seed: o.seed,
            set: o.set.clone(),
            verdicts: o.verdicts,
            success: o.success,
            ledger: (&o.ledger).into(),
            wall_time_ms,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub eps: f64,
    pub delta: f64,
    pub grid_bits: u32,
    pub base_cost_per_call: u64,
}

impl From<&ApproxOracle> for OracleSummary {
    fn from(o: &ApproxOracle) -> Self {
        Self {
            eps: o.claimed_eps(),
            delta: o.claimed_delta(),
            grid_bits: o.grid().bits(),
            base_cost_per_call: o.base_cost_per_call(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub oracle: Option<OracleSummary>,
    pub trials: u64,
    pub successes: u64,
    /// `None` (null) when there are no trials.
    pub success_rate: Option<f64>,
    pub wilson_95: Option<(f64, f64)>,
    pub weak_rate: Option<f64>,
    pub strong_rate: Option<f64>,
    pub mean_queries: Option<f64>,
    pub check: Option<CheckResult>,
}

fn rate(count: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| count as f64 / total as f64)
}

impl RunSummary {
    fn new(config: RunConfig, oracle: Option<OracleSummary>, records: &[TrialRecord]) -> Self {
        let m = records.len();
        let successes = records.iter().filter(|r| r.success).count();
        let check = config.check.then(|| {
            if m == 0 {
                return CheckResult {
                    passed: true,
                    detail: "no trials".into(),
                };
            }
            let floor = acceptance_floor(1.0 - config.delta, m as u64);
            let p = successes as f64 / m as f64;
            CheckResult {
                passed: p >= floor,
                detail: format!("success rate {p:.4} against floor {floor:.4}"),
            }
        });
        Self {
            oracle,
            trials: m as u64,
            successes: successes as u64,
            success_rate: rate(successes, m),
            wilson_95: wilson_interval(successes as u64, m as u64, WILSON_Z),
            weak_rate: rate(records.iter().filter(|r| r.verdicts.weak).count(), m),
            strong_rate: rate(records.iter().filter(|r| r.verdicts.strong).count(), m),
            mean_queries: (m > 0).then(|| records.iter().map(|r| r.ledger.base as f64).sum::<f64>() / m as f64),
            check,
            config,
        }
    }

    fn status(&self) -> Status {
        match &self.check {
            Some(c) if !c.passed => Status::CheckFailed,
            _ => Status::Ok,
        }
    }
}

/// Runs `f` on every trial index in parallel and returns results in index
/// order, optionally with wall time in milliseconds.
fn run_trials<T, F>(trials: u64, timed: bool, f: F) -> Result<Vec<(T, Option<f64>)>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let start = Instant::now();
            let out = f(i)?;
            let ms = timed.then(|| start.elapsed().as_secs_f64() * 1e3);
            Ok((out, ms))
        })
        .collect()
}

fn write_records(path: Option<&Path>, records: &[TrialRecord]) -> Result<()> {
    let mut out = sink(path, Fallback::Stdout)?;
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}

fn build_validated(config: &RunConfig, v: Vec<f64>) -> Result<(ApproxOracle, OracleValidationReport)> {
    let spec = config.oracle_spec(v);
    let oracle = spec.build()?;
    let (eps, delta) = spec.target(&oracle);
    let eps = config.eps.unwrap_or(eps);
    let delta = config.delta0.unwrap_or(delta);
    let report = validate_oracle(&oracle, spec.values()?, eps, delta)?;
    Ok((oracle, report))
}

fn report_invalid(report: &OracleValidationReport) {
    eprintln!(
        "oracle invalid: minimum in-window mass {} below required {}",
        report.min_mass,
        1.0 - report.delta
    );
}

pub fn validate(mut config: RunConfig) -> Result<Status> {
    config.resolve_values()?;
    let v = config.v.clone().unwrap_or_default();
    let (_, report) = build_validated(&config, v)?;
    write_json(config.output.report.as_deref(), Fallback::Stdout, &report)?;
    if report.is_valid() {
        Ok(Status::Ok)
    } else {
        report_invalid(&report);
        Ok(Status::Invalid)
    }
}

pub fn run(config: RunConfig) -> Result<Status> {
    match config.algorithm {
        Task::Weak | Task::Strong => run_finder(config),
        Task::Expectations => run_expectations(config),
        Task::Energies => run_energies(config),
    }
}

fn run_finder(mut config: RunConfig) -> Result<Status> {
    config.resolve_values()?;
    let algorithm = config.algorithm.finder().context("not a finder")?;
    let v = config.v.clone().unwrap_or_default();
    let (oracle, report) = build_validated(&config, v.clone())?;
    if !report.is_valid() {
        report_invalid(&report);
        return Ok(Status::Invalid);
    }
    let finder = FinderConfig {
        algorithm,
        k: config.k,
        eps: report.eps,
        delta: config.delta,
    };
    config.eps = Some(report.eps);
    config.delta0 = Some(report.delta);
    let outcomes = run_trials(config.trials, config.wall_time, |i| {
        Ok(finder.run(&oracle, &v, config.seed, i)?)
    })?;
    let records: Vec<TrialRecord> = outcomes
        .iter()
        .map(|(o, ms)| TrialRecord::from_outcome(o, *ms))
        .collect();
    finish(config, Some((&oracle).into()), &records)
}

fn finish(config: RunConfig, oracle: Option<OracleSummary>, records: &[TrialRecord]) -> Result<Status> {
    write_records(config.output.jsonl.as_deref(), records)?;
    let summary_path = config.output.summary.clone();
    let summary = RunSummary::new(config, oracle, records);
    write_json(summary_path.as_deref(), Fallback::Stderr, &summary)?;
    Ok(summary.status())
}

fn app_record(values: &[f64], result: &IndexSetResult, trial: u64, seed: u64, ms: Option<f64>) -> Result<TrialRecord> {
    let tol = result.tolerance;
    Ok(TrialRecord {
        trial,
        seed,
        set: result.set.clone(),
        verdicts: Verdicts {
            weak: is_weak_set(values, &result.set, tol)?,
            weak_eps: tol,
            strong: is_strong_set(values, &result.set, tol)?,
            strong_eps: tol,
        },
        success: result.success,
        ledger: (&result.ledger).into(),
        wall_time_ms: ms,
    })
}

fn app_oracle(result: &IndexSetResult) -> OracleSummary {
    OracleSummary {
        eps: result.oracle_eps,
        delta: result.oracle_delta,
        grid_bits: result.grid_bits,
        base_cost_per_call: result.base_cost_per_call,
    }
}

fn run_app<F>(mut config: RunConfig, n: usize, values: &[f64], solve: F) -> Result<Status>
where
    F: Fn(f64, Option<f64>, &mut rng::TrialRng) -> qkmin::Result<IndexSetResult> + Sync,
{
    let eps = config.resolve_app(n)?;
    let delta0 = config.delta0;
    // Records are written only after every trial succeeded, so an invalid
    // oracle aborts with empty output.
    let results = run_trials(config.trials, config.wall_time, |i| {
        Ok(solve(eps, delta0, &mut rng::stream(config.seed, i))?)
    })?;
    let oracle = results.first().map(|(r, _)| app_oracle(r));
    let records = results
        .iter()
        .enumerate()
        .map(|(i, (r, ms))| app_record(values, r, i as u64, config.seed, *ms))
        .collect::<Result<Vec<_>>>()?;
    if let Some(o) = &oracle {
        config.delta0 = Some(o.delta);
    }
    finish(config, oracle, &records)
}

fn run_expectations(config: RunConfig) -> Result<Status> {
    let instance: ExpectationInstance = read_json(config.instance_path()?)?;
    let (k, delta) = (config.k, config.delta);
    let values = instance.values().to_vec();
    run_app(config, instance.n(), &values, |eps, delta0, r| {
        find_k_min_expectations(&instance, k, eps, delta, delta0, r)
    })
}

fn run_energies(config: RunConfig) -> Result<Status> {
    let spectrum: SpectrumInstance = read_json(config.instance_path()?)?;
    spectrum.check()?;
    let (k, delta) = (config.k, config.delta);
    run_app(config, spectrum.n(), &spectrum.lambda.clone(), |eps, delta0, r| {
        find_k_ground_energies(&spectrum, k, eps, delta, delta0, r)
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub config: RunConfig,
    pub summaries: Vec<SweepSummary>,
    pub check: Option<CheckResult>,
}

pub fn sweep(mut config: RunConfig) -> Result<Status> {
    let ks = config.resolve_sweep()?;
    let algorithm = config.algorithm.finder().context("not a finder")?;
    let mut grid = Vec::new();
    for &k in &ks {
        for &n in &config.ns {
            let spec = config.sweep_spec(n, k)?;
            let oracle = spec.build()?;
            let (eps, delta) = spec.target(&oracle);
            let eps = config.eps.unwrap_or(eps);
            let report = validate_oracle(&oracle, spec.values()?, eps, config.delta0.unwrap_or(delta))?;
            if !report.is_valid() {
                eprintln!("sweep point n = {n}, k = {k}:");
                report_invalid(&report);
                return Ok(Status::Invalid);
            }
            let finder = FinderConfig {
                algorithm,
                k,
                eps,
                delta: config.delta,
            };
            grid.push((n, k, oracle, spec.v.unwrap_or_default(), finder));
        }
    }
    let trials = config.trials;
    let jobs: Vec<(usize, u64)> = (0..grid.len())
        .flat_map(|p| (0..trials).map(move |i| (p, i)))
        .collect();
    let outcomes: Vec<TrialOutcome> = jobs
        .par_iter()
        .map(|&(p, i)| {
            let (_, _, oracle, v, finder) = &grid[p];
            Ok(finder.run(oracle, v, config.seed, i)?)
        })
        .collect::<Result<_>>()?;
    let mut summaries = Vec::new();
    let mut csv = sink(config.output.csv.as_deref(), Fallback::Stdout)?;
    writeln!(csv, "n,k,mean_queries,std,success")?;
    let mut failures = Vec::new();
    for (&k, block) in ks.iter().zip(outcomes.chunks(trials as usize * config.ns.len())) {
        let mut points = Vec::new();
        for (&n, chunk) in config.ns.iter().zip(block.chunks(trials as usize)) {
            let p = SweepPoint::from_outcomes(n, k, chunk)?;
            writeln!(csv, "{},{},{},{},{}", p.n, p.k, p.mean_queries, p.std_queries, p.success_rate)?;
            let floor = acceptance_floor(1.0 - config.delta, trials);
            if p.success_rate < floor {
                failures.push(format!("n = {n}, k = {k}: success {} below {floor:.4}", p.success_rate));
            }
            points.push(p);
        }
        let s = SweepSummary::new(points)?;
        let [lo, hi] = config.exponent_range;
        if !(lo..=hi).contains(&s.exponent) {
            failures.push(format!("k = {k}: exponent {:.4} outside [{lo}, {hi}]", s.exponent));
        }
        eprintln!("k = {k}: fitted exponent {:.4}", s.exponent);
        summaries.push(s);
    }
    csv.flush()?;
    drop(csv);
    let check = config.check.then(|| CheckResult {
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            "all points within thresholds".into()
        } else {
            failures.join("; ")
        },
    });
    let status = match &check {
        Some(c) if !c.passed => Status::CheckFailed,
        _ => Status::Ok,
    };
    let summary_path = config.output.summary.clone();
    let report = SweepReport {
        config,
        summaries,
        check,
    };
    write_json(summary_path.as_deref(), Fallback::Stderr, &report)?;
    Ok(status)
}
