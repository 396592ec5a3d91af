//! Run configuration: JSON file, command-line overrides and resolution of
//! defaults into the fully explicit form echoed in every summary.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use qkmin::experiment::{random_values, Algorithm};
use qkmin::kmin::negligible_delta0;
use qkmin::oracle::{AdversarialMode, OracleKind, OracleParams, OracleSpec};
use qkmin::{rng, ValueGrid};

/// Stream id reserved for drawing random value vectors; trial `i` uses
/// stream `i`, so the two never collide for realistic trial counts.
const VALUES_STREAM: u64 = 1 << 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Weak,
    Strong,
    Expectations,
    Energies,
}

impl Task {
    pub fn finder(self) -> Option<Algorithm> {
        match self {
            Task::Weak => Some(Algorithm::Weak),
            Task::Strong => Some(Algorithm::Strong),
            Task::Expectations | Task::Energies => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub kind: OracleKind,
    pub grid_bits: u32,
    /// Phase-estimation precision bits (`fejer`).
    pub t: Option<u32>,
    /// Median repetitions (`fejer`); chosen from `delta0` when absent.
    pub r: Option<u32>,
    /// Build precision (`adversarial`).
    pub eps: Option<f64>,
    /// Build failure mass (`adversarial`).
    pub delta: Option<f64>,
    pub mode: Option<AdversarialMode>,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            kind: OracleKind::Exact,
            grid_bits: 12,
            t: None,
            r: None,
            eps: None,
            delta: None,
            mode: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Trial records (JSONL); stdout when absent.
    pub jsonl: Option<PathBuf>,
    /// Summary JSON; stderr when absent.
    pub summary: Option<PathBuf>,
    /// Sweep table; stdout when absent.
    pub csv: Option<PathBuf>,
    /// Validation report; stdout when absent.
    pub report: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub algorithm: Task,
    /// Number of values; taken from `v` or the instance when zero.
    pub n: usize,
    /// Sizes for `sweep`.
    pub ns: Vec<usize>,
    pub k: usize,
    /// Extra `k` values for `sweep`; `[k]` when empty.
    pub ks: Vec<usize>,
    /// Precision the finder assumes and the verdicts use. For oracle runs
    /// defaults to the oracle's claimed precision; required for applications.
    pub eps: Option<f64>,
    pub delta: f64,
    /// Per-call oracle failure probability.
    pub delta0: Option<f64>,
    pub oracle: OracleConfig,
    /// Exact values; drawn uniformly from `[0, 1)` with the seed when absent.
    pub v: Option<Vec<f64>>,
    /// Application instance file.
    pub instance: Option<PathBuf>,
    pub trials: u64,
    pub seed: u64,
    /// Record per-trial wall time (excluded for byte-identical output).
    pub wall_time: bool,
    /// Exit 3 when a success rate falls below `1 - delta - 3 sigma` or a
    /// sweep exponent leaves `exponent_range`.
    pub check: bool,
    pub exponent_range: [f64; 2],
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            algorithm: Task::Strong,
            n: 0,
            ns: Vec::new(),
            k: 1,
            ks: Vec::new(),
            eps: None,
            delta: 0.1,
            delta0: None,
            oracle: OracleConfig::default(),
            v: None,
            instance: None,
            trials: 100,
            seed: 0,
            wall_time: true,
            check: false,
            exponent_range: [0.4, 0.75],
            output: OutputConfig::default(),
        }
    }
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

/// Command-line flags; each one overrides the matching config field.
#[derive(Args, Clone, Debug, Default)]
pub struct Overrides {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// weak | strong | expectations | energies
    #[arg(long, value_parser = parse_enum::<Task>)]
    pub algorithm: Option<Task>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ns: Option<Vec<usize>>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub ks: Option<Vec<usize>>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub delta0: Option<f64>,
    /// exact | fejer | adversarial
    #[arg(long, value_parser = parse_enum::<OracleKind>)]
    pub oracle_kind: Option<OracleKind>,
    #[arg(long)]
    pub grid_bits: Option<u32>,
    #[arg(long)]
    pub t: Option<u32>,
    #[arg(long)]
    pub r: Option<u32>,
    #[arg(long)]
    pub oracle_eps: Option<f64>,
    #[arg(long)]
    pub oracle_delta: Option<f64>,
    /// Adversarial placement of the failure mass.
    #[arg(long, value_parser = parse_enum::<AdversarialMode>)]
    pub mode: Option<AdversarialMode>,
    /// Comma-separated exact values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub values: Option<Vec<f64>>,
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long, env = "QKMIN_SEED")]
    pub seed: Option<u64>,
    #[arg(long)]
    pub no_wall_time: bool,
    #[arg(long)]
    pub check: bool,
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

fn set<T>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

impl Overrides {
    /// Config file (if any) with every given flag applied on top.
    pub fn load(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => read_json(path)?,
            None => RunConfig::default(),
        };
        let o = self.clone();
        set(&mut c.algorithm, o.algorithm);
        set(&mut c.n, o.n);
        set(&mut c.ns, o.ns);
        set(&mut c.k, o.k);
        set(&mut c.ks, o.ks);
        set(&mut c.delta, o.delta);
        set(&mut c.oracle.kind, o.oracle_kind);
        set(&mut c.oracle.grid_bits, o.grid_bits);
        set(&mut c.trials, o.trials);
        set(&mut c.seed, o.seed);
        c.eps = o.eps.or(c.eps);
        c.delta0 = o.delta0.or(c.delta0);
        c.oracle.t = o.t.or(c.oracle.t);
        c.oracle.r = o.r.or(c.oracle.r);
        c.oracle.eps = o.oracle_eps.or(c.oracle.eps);
        c.oracle.delta = o.oracle_delta.or(c.oracle.delta);
        c.oracle.mode = o.mode.or(c.oracle.mode);
        c.v = o.values.or(c.v);
        c.instance = o.instance.or(c.instance);
        c.wall_time &= !o.no_wall_time;
        c.check |= o.check;
        c.output.jsonl = o.output.or(c.output.jsonl);
        c.output.summary = o.summary.or(c.output.summary);
        c.output.csv = o.csv.or(c.output.csv);
        c.output.report = o.report.or(c.output.report);
        Ok(c)
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

impl RunConfig {
    fn check_common(&self) -> Result<()> {
        ensure!(
            self.delta > 0.0 && self.delta < 1.0,
            "delta = {} outside (0, 1)",
            self.delta
        );
        if let Some(d) = self.delta0 {
            ensure!((0.0..1.0).contains(&d), "delta0 = {d} outside [0, 1)");
        }
        if let Some(e) = self.eps {
            ensure!(e >= 0.0 && e.is_finite(), "eps = {e} must be non-negative");
        }
        ensure!(self.k >= 1, "k must be at least 1");
        ensure!(
            self.exponent_range[0] <= self.exponent_range[1],
            "exponent_range is empty"
        );
        ValueGrid::new(self.oracle.grid_bits)?;
        Ok(())
    }

    /// Fixes `n` and `v` for a single oracle run: explicit values win,
    /// otherwise `n` random values are drawn from the seed.
    pub fn resolve_values(&mut self) -> Result<()> {
        self.check_common()?;
        match &self.v {
            Some(v) => {
                ensure!(!v.is_empty(), "value vector is empty");
                ensure!(
                    self.n == 0 || self.n == v.len(),
                    "n = {} but {} values given",
                    self.n,
                    v.len()
                );
                self.n = v.len();
            }
            None => {
                ensure!(self.n > 0, "give either n or explicit values");
                self.v = Some(self.random_values(self.n));
            }
        }
        ensure!(self.k <= self.n, "k = {} exceeds n = {}", self.k, self.n);
        self.resolve_delta0(self.n, self.k)
    }

    fn random_values(&self, n: usize) -> Vec<f64> {
        random_values(n, &mut rng::stream(self.seed, VALUES_STREAM + n as u64))
    }

    fn resolve_delta0(&mut self, n: usize, k: usize) -> Result<()> {
        if self.oracle.kind == OracleKind::Fejer && self.oracle.r.is_none() && self.delta0.is_none() {
            let grid = ValueGrid::new(self.oracle.grid_bits)?;
            self.delta0 = Some(negligible_delta0(self.delta, n, k, grid));
        }
        Ok(())
    }

    /// Oracle spec over `v`.
    pub fn oracle_spec(&self, v: Vec<f64>) -> OracleSpec {
        let o = &self.oracle;
        OracleSpec {
            n: v.len(),
            grid_bits: o.grid_bits,
            kind: o.kind,
            v: Some(v),
            params: OracleParams {
                t: o.t,
                r: o.r,
                delta0: self.delta0,
                eps: o.eps,
                delta: o.delta,
                mode: o.mode,
            },
        }
    }

    /// Checks the sweep grid and returns the `k` values to sweep.
    pub fn resolve_sweep(&mut self) -> Result<Vec<usize>> {
        self.check_common()?;
        let Some(_) = self.algorithm.finder() else {
            bail!("sweep runs the weak or strong finder, not {:?}", self.algorithm);
        };
        ensure!(self.v.is_none(), "sweep draws its own values; drop v");
        let mut ns = self.ns.clone();
        ns.sort_unstable();
        ns.dedup();
        ensure!(
            ns.len() >= 3,
            "sweep needs at least three distinct values of n, got {:?}",
            self.ns
        );
        ensure!(self.trials >= 1, "sweep needs at least one trial per point");
        if self.ks.is_empty() {
            self.ks = vec![self.k];
        }
        let mut ks = self.ks.clone();
        ks.sort_unstable();
        ks.dedup();
        ensure!(ks[0] >= 1, "k must be at least 1");
        if let Some(&k) = ks.iter().find(|&&k| k > ns[0]) {
            bail!("k = {k} exceeds the smallest n = {}", ns[0]);
        }
        self.ns = ns;
        Ok(ks)
    }

    /// Values for sweep point `n`, shared by every `k`.
    pub fn sweep_values(&self, n: usize) -> Vec<f64> {
        self.random_values(n)
    }

    /// `delta0` for a sweep point, without touching the echoed config.
    pub fn sweep_spec(&self, n: usize, k: usize) -> Result<OracleSpec> {
        let mut c = self.clone();
        c.resolve_delta0(n, k)?;
        Ok(c.oracle_spec(self.sweep_values(n)))
    }

    /// Checks the application settings; `eps` is the target precision.
    pub fn resolve_app(&mut self, n: usize) -> Result<f64> {
        self.check_common()?;
        let Some(eps) = self.eps else {
            bail!("applications need eps");
        };
        ensure!(self.k <= n, "k = {} exceeds n = {n}", self.k);
        self.n = n;
        Ok(eps)
    }

    pub fn instance_path(&self) -> Result<&Path> {
        self.instance
            .as_deref()
            .context("applications need an instance file")
    }
}
