//! Seeded, parallel repeated-trial experiments and their aggregation.
//!
//! Trial `i` draws all of its randomness from the stream `(base_seed, i)`.
//! Trials run in parallel batches and are folded strictly in index order, so
//! aggregates are bitwise identical for any thread count.

use std::fmt::Write as _;
use std::hash::Hasher;
use std::path::Path;
use std::time::{Duration, Instant};

use fnv::FnvHasher;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dynamics::{run_trajectory, DynamicsError, EventProbabilities, Model, Trajectory, UpdateMode};
use crate::graph::{generate, parse_entry, GraphError, SelectionMatrix, Topology};
use crate::metrics::{classify, measure, spread, Classification, MeasureSample};
use crate::rng::trial_rng;
use crate::schedule::Schedule;
use crate::theory::{theory_report, TheoryError, TheoryParams, TheoryReport};

/// Trials evaluated in parallel before folding into the aggregate.
const BATCH: usize = 1024;

/// Normal quantile for two-sided 95% intervals.
const Z95: f64 = 1.96;

/// Raw sample kurtosis of L above this marks a checkpoint as heavy-tailed.
pub const HEAVY_TAIL_KURTOSIS: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config JSON: {0}")]
    Json(String),
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("checkpoint {k} lies outside [{k0}, {end}]")]
    CheckpointRange { k: u64, k0: u64, end: u64 },
    #[error("checkpoint spacing must be positive")]
    CheckpointSpacing,
    #[error("initial state has {got} entries but the graph has {n} nodes")]
    InitialLength { got: usize, n: usize },
    #[error("invalid initial state: {0}")]
    Initial(String),
    #[error("invalid classification thresholds: {0}")]
    Thresholds(String),
    #[error("cannot address `{axis}`: {reason}")]
    BadAxis { axis: String, reason: String },
    #[error("graph file {path}: {source}")]
    GraphFile { path: String, source: GraphError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Theory(#[from] TheoryError),
}

/// A matrix entry: a number or a fraction string such as `"2/3"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Number(f64),
    Text(String),
}

impl Entry {
    fn value(&self) -> Result<f64, GraphError> {
        match self {
            Entry::Number(v) => Ok(*v),
            Entry::Text(s) => parse_entry(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Inline { rows: Vec<Vec<Entry>> },
    Generate { topology: Topology, n: usize, seed: u64 },
    /// JSON or CSV matrix file; resolved to `Inline` before running.
    File { path: String },
}

impl GraphSource {
    pub fn matrix(&self) -> Result<SelectionMatrix, ConfigError> {
        match self {
            GraphSource::Inline { rows } => {
                let rows = rows
                    .iter()
                    .map(|r| r.iter().map(Entry::value).collect::<Result<Vec<f64>, _>>())
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(SelectionMatrix::validate(rows)?)
            }
            GraphSource::Generate { topology, n, seed } => Ok(generate(*topology, *n, *seed)?),
            GraphSource::File { path } => SelectionMatrix::load(Path::new(path))
                .map_err(|source| ConfigError::GraphFile { path: path.clone(), source }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schedules {
    #[serde(rename = "T")]
    pub t: Schedule,
    #[serde(rename = "S")]
    pub s: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Explicit { values: Vec<f64> },
    /// `x_i = i` for `i = 1..n`.
    #[default]
    Ramp,
    /// Independent uniform draws on `[lo, hi)` from the trial's own stream.
    Uniform { lo: f64, hi: f64 },
}

impl InitialState {
    fn check(&self, n: usize) -> Result<(), ConfigError> {
        match self {
            InitialState::Explicit { values } if values.len() != n => {
                Err(ConfigError::InitialLength { got: values.len(), n })
            }
            InitialState::Explicit { values } => match values.iter().position(|v| !v.is_finite()) {
                Some(i) => Err(ConfigError::Initial(format!("entry {i} is not finite"))),
                None => Ok(()),
            },
            InitialState::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && lo < hi) => {
                Err(ConfigError::Initial(format!("uniform range [{lo}, {hi}) is empty or not finite")))
            }
            _ => Ok(()),
        }
    }

    pub fn is_deterministic(&self) -> bool {
        !matches!(self, InitialState::Uniform { .. })
    }

    fn draw<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            InitialState::Explicit { values } => values.clone(),
            InitialState::Ramp => (1..=n).map(|i| i as f64).collect(),
            InitialState::Uniform { lo, hi } => (0..n).map(|_| rng.gen_range(*lo..*hi)).collect(),
        }
    }
}

/// Checkpoint slots: an explicit list of absolute slot indices, or every
/// `every` slots from `k0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Checkpoints {
    List(Vec<u64>),
    Every { every: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyThresholds {
    #[serde(default = "default_eps_agree")]
    pub eps_agree: f64,
    /// Defaults to `1e6` times the trial's initial spread.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub big_m: Option<f64>,
}

fn default_eps_agree() -> f64 {
    1e-6
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        ClassifyThresholds { eps_agree: default_eps_agree(), big_m: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    #[serde(default = "default_mode")]
    pub mode: UpdateMode,
    pub probs: EventProbabilities,
    pub schedules: Schedules,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub k0: u64,
    pub trials: u64,
    pub steps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<Checkpoints>,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default)]
    pub classify: ClassifyThresholds,
    #[serde(default)]
    pub theory: TheoryParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_mode() -> UpdateMode {
    UpdateMode::Symmetric
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
    }

    pub fn from_value(value: Value) -> Result<Self, ConfigError> {
        serde_json::from_value(value).map_err(|e| ConfigError::Json(e.to_string()))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// Canonical JSON: object keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        self.to_value().to_string()
    }

    /// 64-bit FNV-1a of the canonical JSON, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h = FnvHasher::default();
        h.write(self.canonical_json().as_bytes());
        format!("{:016x}", h.finish())
    }

    /// Replaces a file graph source by its inline rows.
    pub fn resolve(&mut self) -> Result<(), ConfigError> {
        if let GraphSource::File { .. } = self.graph {
            let a = self.graph.matrix()?;
            let rows = a.rows().iter().map(|r| r.iter().map(|&v| Entry::Number(v)).collect()).collect();
            self.graph = GraphSource::Inline { rows };
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, ConfigError> {
        let matrix = self.graph.matrix()?;
        Ok(Model::new(matrix, self.mode, self.probs, self.schedules.t.clone(), self.schedules.s.clone())?)
    }

    /// Sorted, deduplicated checkpoint slots including `k0` and the last slot.
    pub fn checkpoint_slots(&self) -> Result<Vec<u64>, ConfigError> {
        let (k0, end) = (self.k0, self.k0 + self.steps);
        let mut slots = match &self.checkpoints {
            None => {
                let mut v = vec![k0];
                let mut d = 1;
                while d < self.steps {
                    v.push(k0 + d);
                    d *= 2;
                }
                v
            }
            Some(Checkpoints::Every { every: 0 }) => return Err(ConfigError::CheckpointSpacing),
            Some(Checkpoints::Every { every }) => (k0..=end).step_by(*every as usize).collect(),
            Some(Checkpoints::List(list)) => {
                if let Some(&k) = list.iter().find(|&&k| k < k0 || k > end) {
                    return Err(ConfigError::CheckpointRange { k, k0, end });
                }
                list.clone()
            }
        };
        slots.push(k0);
        slots.push(end);
        slots.sort_unstable();
        slots.dedup();
        Ok(slots)
    }

    /// Checks everything a run needs, returning the prepared experiment.
    pub fn prepare(&self) -> Result<Experiment, ConfigError> {
        Experiment::new(self)
    }
}

/// Measures and classifications of one trial at every checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub index: u64,
    /// `None` at checkpoints after the state left the finite range.
    pub samples: Vec<Option<MeasureSample>>,
    /// Classification of the run prefix ending at each checkpoint.
    pub classes: Vec<Classification>,
    pub diverged_at: Option<u64>,
    pub clipped_slots: u64,
}

impl TrialResult {
    pub fn classification(&self) -> Classification {
        *self.classes.last().expect("at least one checkpoint")
    }
}

/// A validated configuration ready to run trials.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Model,
    pub checkpoints: Vec<u64>,
}

impl Experiment {
    pub fn new(config: &ExperimentConfig) -> Result<Self, ConfigError> {
        if config.trials == 0 {
            return Err(ConfigError::NoTrials);
        }
        let model = config.model()?;
        config.initial.check(model.n())?;
        let th = &config.classify;
        if !(th.eps_agree > 0.0) || th.big_m.is_some_and(|m| !(m > th.eps_agree)) {
            return Err(ConfigError::Thresholds(format!(
                "need 0 < eps_agree < big_m, got eps_agree = {}, big_m = {:?}",
                th.eps_agree, th.big_m
            )));
        }
        let checkpoints = config.checkpoint_slots()?;
        Ok(Experiment { config: config.clone(), model, checkpoints })
    }

    fn initial(&self, rng: &mut crate::rng::TrialRng) -> Vec<f64> {
        self.config.initial.draw(self.model.n(), rng)
    }

    /// Full trajectory of one trial, snapshotting the given slots.
    pub fn trajectory(&self, index: u64, slots: &[u64]) -> (Vec<f64>, Trajectory) {
        let mut rng = trial_rng(self.config.base_seed, index);
        let x0 = self.initial(&mut rng);
        let traj = run_trajectory(&self.model, &x0, self.config.k0, self.config.steps, slots, &mut rng)
            .expect("initial state validated");
        (x0, traj)
    }

    pub fn run_trial(&self, index: u64) -> TrialResult {
        let (x0, traj) = self.trajectory(index, &self.checkpoints);
        let x_ave = x0.iter().sum::<f64>() / x0.len() as f64;
        let big_m = self.config.classify.big_m.unwrap_or_else(|| {
            let h0 = spread(&x0);
            if h0 > 0.0 {
                1e6 * h0
            } else {
                1e6
            }
        });
        let eps = self.config.classify.eps_agree;
        let mut snaps = traj.snapshots.iter().peekable();
        let mut samples = Vec::with_capacity(self.checkpoints.len());
        let mut classes = Vec::with_capacity(self.checkpoints.len());
        let mut seen: Vec<MeasureSample> = Vec::new();
        for &k in &self.checkpoints {
            while snaps.peek().is_some_and(|s| s.k < k) {
                snaps.next();
            }
            let sample = snaps.peek().filter(|s| s.k == k).map(|s| measure(s, x_ave));
            if let Some(s) = sample {
                seen.push(s);
            }
            let diverged = traj.diverged_at.is_some_and(|d| d <= k);
            classes.push(if diverged { Classification::Diverged } else { classify(&seen, eps, big_m) });
            samples.push(sample);
        }
        TrialResult { index, samples, classes, diverged_at: traj.diverged_at, clipped_slots: traj.clipped_slots }
    }

    /// Runs all trials and folds them in index order.
    pub fn run(&self) -> ExperimentAggregate {
        let started = Instant::now();
        let mut folds: Vec<CheckpointFold> = self.checkpoints.iter().map(|&k| CheckpointFold::new(k)).collect();
        let mut clipped = 0;
        let trials = self.config.trials;
        let mut next = 0;
        while next < trials {
            let end = (next + BATCH as u64).min(trials);
            let batch: Vec<TrialResult> = (next..end).into_par_iter().map(|i| self.run_trial(i)).collect();
            for r in &batch {
                clipped += r.clipped_slots;
                for (fold, (sample, class)) in folds.iter_mut().zip(r.samples.iter().zip(&r.classes)) {
                    fold.push(sample.as_ref(), *class);
                }
            }
            next = end;
        }
        ExperimentAggregate {
            config_hash: self.config.hash(),
            base_seed: self.config.base_seed,
            trials,
            clipped_slots: clipped,
            checkpoints: folds.into_iter().map(CheckpointFold::finish).collect(),
            wall_time: started.elapsed(),
        }
    }
}

pub fn run_trial(config: &ExperimentConfig, index: u64) -> Result<TrialResult, ConfigError> {
    Ok(Experiment::new(config)?.run_trial(index))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentAggregate, ConfigError> {
    Ok(Experiment::new(config)?.run())
}

/// Running mean and central moments up to fourth order.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance; zero for a single observation.
    fn variance(&self) -> f64 {
        match self.n {
            0 => f64::NAN,
            1 => 0.0,
            n => (self.m2 / (n - 1) as f64).max(0.0),
        }
    }

    fn ci_half_width(&self) -> f64 {
        Z95 * (self.variance() / self.n as f64).sqrt()
    }

    /// Raw (non-excess) kurtosis; NaN when the sample has no spread.
    fn kurtosis(&self) -> f64 {
        self.n as f64 * self.m4 / (self.m2 * self.m2)
    }
}

#[derive(Debug, Clone)]
struct CheckpointFold {
    k: u64,
    l: Moments,
    spread: Moments,
    counts: [u64; 3],
}

impl CheckpointFold {
    fn new(k: u64) -> Self {
        CheckpointFold { k, l: Moments::default(), spread: Moments::default(), counts: [0; 3] }
    }

    fn push(&mut self, sample: Option<&MeasureSample>, class: Classification) {
        if let Some(s) = sample {
            self.l.push(s.l);
            self.spread.push(s.spread);
        }
        self.counts[match class {
            Classification::Agreed => 0,
            Classification::Diverged => 1,
            Classification::Undecided => 2,
        }] += 1;
    }

    fn finish(self) -> CheckpointStats {
        let kurtosis = self.l.kurtosis();
        CheckpointStats {
            k: self.k,
            n_finite: self.l.n,
            mean_l: self.l.mean(),
            var_l: self.l.variance(),
            ci_l: self.l.ci_half_width(),
            mean_spread: self.spread.mean(),
            var_spread: self.spread.variance(),
            ci_spread: self.spread.ci_half_width(),
            kurtosis_l: kurtosis,
            heavy_tail: kurtosis > HEAVY_TAIL_KURTOSIS,
            n_agreed: self.counts[0],
            n_diverged: self.counts[1],
            n_undecided: self.counts[2],
        }
    }
}

/// Statistics at one checkpoint. Trials that diverged before `k` are left out
/// of the moments (`n_finite` counts the rest) but counted as Diverged.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckpointStats {
    pub k: u64,
    pub n_finite: u64,
    #[serde(rename = "meanL")]
    pub mean_l: f64,
    #[serde(rename = "varL")]
    pub var_l: f64,
    /// Half-width of the 95% normal-approximation interval for the mean.
    #[serde(rename = "ciL")]
    pub ci_l: f64,
    pub mean_spread: f64,
    pub var_spread: f64,
    pub ci_spread: f64,
    #[serde(rename = "kurtosisL")]
    pub kurtosis_l: f64,
    /// Intervals here are advisory.
    pub heavy_tail: bool,
    pub n_agreed: u64,
    pub n_diverged: u64,
    pub n_undecided: u64,
}

impl CheckpointStats {
    /// Standard error of the mean of L.
    pub fn se_l(&self) -> f64 {
        (self.var_l / self.n_finite as f64).sqrt()
    }

    pub fn se_spread(&self) -> f64 {
        (self.var_spread / self.n_finite as f64).sqrt()
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentAggregate {
    pub config_hash: String,
    pub base_seed: u64,
    pub trials: u64,
    /// Total slots across trials whose weights were clipped into range.
    pub clipped_slots: u64,
    pub checkpoints: Vec<CheckpointStats>,
    /// Kept out of serialized output so files are reproducible byte for byte.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl ExperimentAggregate {
    pub fn at(&self, k: u64) -> Option<&CheckpointStats> {
        self.checkpoints.iter().find(|c| c.k == k)
    }

    pub fn last(&self) -> &CheckpointStats {
        self.checkpoints.last().expect("at least one checkpoint")
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "k", "meanL", "varL", "ciL", "meanSpread", "varSpread", "ciSpread", "nAgreed", "nDiverged", "nUndecided",
        ])
        .expect("in-memory write");
        for c in &self.checkpoints {
            w.write_record(&[
                c.k.to_string(),
                c.mean_l.to_string(),
                c.var_l.to_string(),
                c.ci_l.to_string(),
                c.mean_spread.to_string(),
                c.var_spread.to_string(),
                c.ci_spread.to_string(),
                c.n_agreed.to_string(),
                c.n_diverged.to_string(),
                c.n_undecided.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("aggregate serializes")
    }
}

/// Trajectory table `trial,k,x_1..x_n,H,h,spread,L` for every slot of one trial.
pub fn trajectory_csv(experiment: &Experiment, index: u64) -> String {
    let cfg = &experiment.config;
    let slots: Vec<u64> = (cfg.k0..=cfg.k0 + cfg.steps).collect();
    let (x0, traj) = experiment.trajectory(index, &slots);
    let x_ave = x0.iter().sum::<f64>() / x0.len() as f64;
    let mut out = String::from("trial,k");
    for i in 1..=x0.len() {
        let _ = write!(out, ",x_{i}");
    }
    out.push_str(",H,h,spread,L\n");
    for state in &traj.snapshots {
        let m = measure(state, x_ave);
        let _ = write!(out, "{index},{}", state.k);
        for v in &state.x {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{},{},{},{}", m.max, m.min, m.spread, m.l);
    }
    out
}

/// Sets the scalar at a dotted path (`schedules.T.value`, `initial.values.0`).
/// With `create`, a missing final key is added to an existing object.
pub fn set_path(root: &mut Value, path: &str, new: Value, create: bool) -> Result<(), ConfigError> {
    let bad = |reason: &str| ConfigError::BadAxis { axis: path.to_string(), reason: reason.to_string() };
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(bad("empty path segment"));
    }
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut node = root;
    for p in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*p).ok_or_else(|| bad(&format!("no field `{p}`")))?,
            Value::Array(items) => {
                let i: usize = p.parse().map_err(|_| bad(&format!("`{p}` is not an index")))?;
                items.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range")))?
            }
            _ => return Err(bad(&format!("`{p}` is below a scalar"))),
        };
    }
    let slot = match node {
        Value::Object(map) => {
            if !map.contains_key(*last) && !create {
                return Err(bad(&format!("no field `{last}`")));
            }
            map.entry(last.to_string()).or_insert(Value::Null)
        }
        Value::Array(items) => {
            let i: usize = last.parse().map_err(|_| bad(&format!("`{last}` is not an index")))?;
            items.get_mut(i).ok_or_else(|| bad(&format!("index {i} out of range")))?
        }
        _ => return Err(bad("parent is a scalar")),
    };
    if slot.is_object() || slot.is_array() {
        return Err(bad("target is not a scalar"));
    }
    *slot = new;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: Value,
    pub config: ExperimentConfig,
    pub aggregate: ExperimentAggregate,
    pub report: TheoryReport,
}

/// Configs for each sweep value; `axis` must address a numeric field.
pub fn sweep_configs(template: &ExperimentConfig, axis: &str, values: &[Value]) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let mut base = template.to_value();
    if let Value::Object(map) = &mut base {
        map.remove("sweep");
    }
    let mut probe = base.clone();
    let current = axis.split('.').try_fold(&mut probe, |node, p| match node {
        Value::Object(map) => map.get_mut(p),
        Value::Array(items) => p.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
        _ => None,
    });
    if !current.is_some_and(|v| v.is_number()) {
        return Err(ConfigError::BadAxis { axis: axis.to_string(), reason: "not a numeric field".to_string() });
    }
    values
        .iter()
        .map(|v| {
            let mut cfg = base.clone();
            set_path(&mut cfg, axis, v.clone(), false)?;
            ExperimentConfig::from_value(cfg)
        })
        .collect()
}

/// One experiment and one theory report per axis value.
pub fn sweep(template: &ExperimentConfig, axis: &str, values: &[Value]) -> Result<Vec<SweepPoint>, ConfigError> {
    let configs = sweep_configs(template, axis, values)?;
    configs
        .into_iter()
        .zip(values)
        .map(|(config, value)| {
            let experiment = Experiment::new(&config)?;
            let report = theory_report(&experiment.model, &config.theory)?;
            let aggregate = experiment.run();
            Ok(SweepPoint { value: value.clone(), config, aggregate, report })
        })
        .collect()
}
