use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use gossip_core::montecarlo::{self, ConfigError, Experiment, ExperimentConfig, GraphSource};
use gossip_core::oracle::{self, OracleError, ORACLE_TOLERANCE};
use gossip_core::{measure, theory_report, TheoryError, TheoryReport};

const MANIFEST: &str = "manifest.json";
const TOOL: &str = "gossip";

#[derive(Parser)]
#[command(name = "gossip", version, about = "Randomized gossip with attraction, neglect and repulsion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one trajectory, every slot.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        /// Trial index whose random stream is replayed.
        #[arg(long)]
        trial: Option<u64>,
    },
    /// Run all trials and write the per-checkpoint aggregate.
    Experiment {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run the config's `sweep` axis, one subdirectory per value.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Print the theory report as JSON.
    Check {
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Compare enumerated and spectral one-slot expectations (n <= 4).
    Oracle {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 100)]
        states: usize,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config, or a manifest from an earlier run.
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    steps: Option<u64>,
    /// Override a field by dotted path, e.g. `schedules.T.value=0.25`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    sets: Vec<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Output directory; defaults to `runs/<command>-<config hash>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }
}

trait Classify<T> {
    fn config(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn config(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Config(e.into()))
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn theory_failure(e: TheoryError) -> Failure {
    match e {
        TheoryError::InternalInconsistency(_) => Failure::Runtime(e.into()),
        other => Failure::Config(other.into()),
    }
}

/// Everything needed to rerun a command and get the same output files.
#[derive(Serialize, Deserialize)]
struct RunManifest {
    tool: String,
    version: String,
    command: String,
    config_path: String,
    config_hash: String,
    base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trial: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<Format>,
    outputs: Vec<String>,
    threads: usize,
    started_at: String,
    #[serde(default)]
    finished_at: Option<String>,
    #[serde(default)]
    wall_time_secs: Option<f64>,
    resolved_config: Value,
}

impl RunManifest {
    fn new(command: &str, loaded: &Loaded, trial: Option<u64>, format: Option<Format>, outputs: Vec<String>) -> Self {
        RunManifest {
            tool: TOOL.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_path: loaded.path.display().to_string(),
            config_hash: loaded.config.hash(),
            base_seed: loaded.config.base_seed,
            trial,
            format,
            outputs,
            threads: rayon::current_num_threads(),
            started_at: chrono::Utc::now().to_rfc3339(),
            finished_at: None,
            wall_time_secs: None,
            resolved_config: loaded.config.to_value(),
        }
    }

    fn write(&self, dir: &Path) -> Result<(), Failure> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(&dir.join(MANIFEST), &(text + "\n"))
    }

    fn finish(&mut self, dir: &Path, started: Instant) -> Result<(), Failure> {
        self.finished_at = Some(chrono::Utc::now().to_rfc3339());
        self.wall_time_secs = Some(started.elapsed().as_secs_f64());
        self.write(dir)
    }
}

struct Loaded {
    path: PathBuf,
    config: ExperimentConfig,
    /// Settings recorded in a manifest, used when the flags leave them unset.
    trial: Option<u64>,
    format: Option<Format>,
}

fn parse_override(raw: &str) -> Result<(&str, Value), Failure> {
    let (path, text) = raw.split_once('=').ok_or_else(|| Failure::Config(anyhow!("--set expects PATH=VALUE, got `{raw}`")))?;
    let value = serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()));
    Ok((path, value))
}

fn load(args: &ConfigArgs) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("cannot read {}", args.config.display()))
        .config()?;
    let mut value: Value = serde_json::from_str(&text)
        .with_context(|| format!("{} is not valid JSON", args.config.display()))
        .config()?;
    let (mut trial, mut format) = (None, None);
    if value.get("tool").and_then(Value::as_str) == Some(TOOL) && value.get("resolved_config").is_some() {
        let manifest: RunManifest = serde_json::from_value(value).context("unreadable manifest").config()?;
        trial = manifest.trial;
        format = manifest.format;
        value = manifest.resolved_config;
    }
    for raw in &args.sets {
        let (path, v) = parse_override(raw)?;
        montecarlo::set_path(&mut value, path, v, true).config()?;
    }
    for (key, flag) in [("base_seed", args.seed), ("trials", args.trials), ("steps", args.steps)] {
        if let Some(v) = flag {
            montecarlo::set_path(&mut value, key, json!(v), true).config()?;
        }
    }
    let mut config = ExperimentConfig::from_value(value).config()?;
    if let GraphSource::File { path } = &mut config.graph {
        let base = args.config.parent().unwrap_or(Path::new(""));
        *path = base.join(&*path).display().to_string();
    }
    config.resolve().config()?;
    Ok(Loaded { path: args.config.clone(), config, trial, format })
}

/// Prints a line to stdout; a closed pipe is not an error.
fn emit(line: &str) -> Result<(), Failure> {
    match writeln!(io::stdout().lock(), "{line}") {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(Failure::Runtime(e.into())),
        _ => Ok(()),
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display())).runtime()
}

fn out_dir(run: &RunArgs, command: &str, config: &ExperimentConfig) -> Result<PathBuf, Failure> {
    let dir = run.out.clone().unwrap_or_else(|| PathBuf::from(format!("runs/{command}-{}", config.hash())));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display())).runtime()?;
    Ok(dir)
}

fn prepare(config: &ExperimentConfig) -> Result<Experiment, Failure> {
    config.prepare().map_err(|e| match e {
        ConfigError::Theory(t) => theory_failure(t),
        other => Failure::Config(other.into()),
    })
}

fn report_json(experiment: &Experiment) -> Result<String, Failure> {
    let report: TheoryReport = theory_report(&experiment.model, &experiment.config.theory).map_err(theory_failure)?;
    Ok(report.to_json_pretty() + "\n")
}

fn aggregate_text(aggregate: &montecarlo::ExperimentAggregate, format: Format) -> String {
    match format {
        Format::Csv => aggregate.to_csv(),
        Format::Json => aggregate.to_json_pretty() + "\n",
    }
}

fn trajectory_json(experiment: &Experiment, index: u64) -> String {
    let cfg = &experiment.config;
    let slots: Vec<u64> = (cfg.k0..=cfg.k0 + cfg.steps).collect();
    let (x0, traj) = experiment.trajectory(index, &slots);
    let x_ave = x0.iter().sum::<f64>() / x0.len() as f64;
    let rows: Vec<Value> = traj
        .snapshots
        .iter()
        .map(|state| {
            let m = measure(state, x_ave);
            json!({"trial": index, "k": state.k, "x": state.x, "H": m.max, "h": m.min, "spread": m.spread, "L": m.l})
        })
        .collect();
    serde_json::to_string_pretty(&rows).expect("trajectory serializes") + "\n"
}

fn simulate(run: &RunArgs, trial: Option<u64>) -> Result<(), Failure> {
    let loaded = load(&run.config)?;
    let format = run.format.or(loaded.format).unwrap_or(Format::Csv);
    let trial = trial.or(loaded.trial).unwrap_or(0);
    let experiment = prepare(&loaded.config)?;
    let dir = out_dir(run, "simulate", &loaded.config)?;
    let name = format!("trajectory.{}", format.ext());
    let mut manifest = RunManifest::new("simulate", &loaded, Some(trial), Some(format), vec![name.clone()]);
    manifest.write(&dir)?;
    let started = Instant::now();
    let text = match format {
        Format::Csv => montecarlo::trajectory_csv(&experiment, trial),
        Format::Json => trajectory_json(&experiment, trial),
    };
    write_file(&dir.join(&name), &text)?;
    manifest.finish(&dir, started)?;
    emit(&dir.join(name).display().to_string())?;
    Ok(())
}

fn experiment(run: &RunArgs) -> Result<(), Failure> {
    let loaded = load(&run.config)?;
    let format = run.format.or(loaded.format).unwrap_or(Format::Csv);
    let experiment = prepare(&loaded.config)?;
    let report = report_json(&experiment)?;
    let dir = out_dir(run, "experiment", &loaded.config)?;
    let name = format!("aggregate.{}", format.ext());
    let outputs = vec![name.clone(), "theory.json".to_string()];
    let mut manifest = RunManifest::new("experiment", &loaded, None, Some(format), outputs);
    manifest.write(&dir)?;
    let started = Instant::now();
    write_file(&dir.join("theory.json"), &report)?;
    let aggregate = experiment.run();
    write_file(&dir.join(&name), &aggregate_text(&aggregate, format))?;
    manifest.finish(&dir, started)?;
    emit(&dir.display().to_string())?;
    Ok(())
}

fn sweep(run: &RunArgs) -> Result<(), Failure> {
    let loaded = load(&run.config)?;
    let format = run.format.or(loaded.format).unwrap_or(Format::Csv);
    let spec = loaded.config.sweep.clone().ok_or_else(|| Failure::Config(anyhow!("config has no `sweep` section")))?;
    let configs = montecarlo::sweep_configs(&loaded.config, &spec.axis, &spec.values).config()?;
    let experiments = configs.iter().map(prepare).collect::<Result<Vec<_>, _>>()?;
    let reports = experiments.iter().map(report_json).collect::<Result<Vec<_>, _>>()?;
    let dir = out_dir(run, "sweep", &loaded.config)?;
    let subdirs: Vec<String> = spec.values.iter().enumerate().map(|(i, v)| format!("{i:02}_{v}")).collect();
    let mut manifest = RunManifest::new("sweep", &loaded, None, Some(format), subdirs.clone());
    manifest.write(&dir)?;
    let started = Instant::now();
    for ((sub, experiment), report) in subdirs.iter().zip(&experiments).zip(&reports) {
        let point_dir = dir.join(sub);
        fs::create_dir_all(&point_dir).with_context(|| format!("cannot create {}", point_dir.display())).runtime()?;
        let point = Loaded { path: loaded.path.clone(), config: experiment.config.clone(), trial: None, format: None };
        let name = format!("aggregate.{}", format.ext());
        let outputs = vec![name.clone(), "theory.json".to_string()];
        let mut point_manifest = RunManifest::new("experiment", &point, None, Some(format), outputs);
        point_manifest.write(&point_dir)?;
        let point_started = Instant::now();
        write_file(&point_dir.join("theory.json"), report)?;
        let aggregate = experiment.run();
        write_file(&point_dir.join(&name), &aggregate_text(&aggregate, format))?;
        point_manifest.finish(&point_dir, point_started)?;
    }
    manifest.finish(&dir, started)?;
    emit(&dir.display().to_string())?;
    Ok(())
}

fn check(args: &ConfigArgs) -> Result<(), Failure> {
    let loaded = load(args)?;
    let model = loaded.config.model().config()?;
    let report = theory_report(&model, &loaded.config.theory).map_err(theory_failure)?;
    emit(&report.to_json_pretty())?;
    Ok(())
}

fn run_oracle(args: &ConfigArgs, states: usize) -> Result<(), Failure> {
    let loaded = load(args)?;
    let model = loaded.config.model().config()?;
    let report = oracle::run_oracle(&model, loaded.config.k0, states, loaded.config.base_seed).map_err(|e| match e {
        OracleError::TooLarge(_) | OracleError::NotSymmetric => Failure::Config(e.into()),
    })?;
    emit(&format!("max_abs_discrepancy {:e} over {} states", report.max_abs_discrepancy, report.states))?;
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Runtime(anyhow!(
            "discrepancy {:e} exceeds {ORACLE_TOLERANCE:e}",
            report.max_abs_discrepancy
        )))
    }
}

fn init_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("GOSSIP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Config(anyhow!("GOSSIP_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().runtime()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match &cli.command {
        Command::Simulate { run, trial } => simulate(run, *trial),
        Command::Experiment { run } => experiment(run),
        Command::Sweep { run } => sweep(run),
        Command::Check { config } => check(config),
        Command::Oracle { config, states } => run_oracle(config, *states),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let code = failure.code();
            let (Failure::Config(e) | Failure::Runtime(e)) = failure;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}
