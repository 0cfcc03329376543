use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::thread;

use clap::Args;
use mapf_mech::instance::{sample_instance, Instance, SamplingConfig};
use mapf_mech::mechanism::{self, MechanismKind, MechanismOutcome};
use mapf_mech::rng::derive_seed;
use serde::{Deserialize, Serialize};

use crate::common::{self, CliError};
use crate::summary;

pub const RESULTS_HEADER: &str = "# mapf-mech results v1";
pub const RESULTS_COLUMNS: &str =
    "map,layers,n,instance_seed,mechanism,m,success,runtime_s,social_welfare,sum_payments,max_payment,num_zero_payment_agents";
pub const PAYMENTS_HEADER: &str = "# mapf-mech payments v1";
pub const PAYMENTS_COLUMNS: &str = "map,layers,n,instance_seed,mechanism,m,agent,payment";

fn default_instances() -> usize {
    100
}
fn default_layers() -> usize {
    1
}
fn default_mechanisms() -> Vec<MechanismKind> {
    MechanismKind::ALL.to_vec()
}
fn default_samples() -> Vec<usize> {
    vec![100]
}
fn default_time_limit() -> f64 {
    3600.0
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}

/// A campaign: every mechanism on `instances` random instances per agent
/// count. Together with the code version it determines every output byte
/// (apart from runtimes, which can be switched off).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Relative paths are resolved against the config file's directory.
    pub map: PathBuf,
    #[serde(default = "default_layers")]
    pub layers: usize,
    pub agents: Vec<usize>,
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_mechanisms")]
    pub mechanisms: Vec<MechanismKind>,
    /// MCPP sample counts; one MCPP row per entry.
    #[serde(default = "default_samples")]
    pub samples: Vec<usize>,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_time_limit")]
    pub time_limit_s: f64,
    /// When false the runtime column is left empty, making the CSVs
    /// byte-reproducible.
    #[serde(default = "yes")]
    pub record_runtime: bool,
    /// Worker threads inside each MCPP run.
    #[serde(default = "one")]
    pub threads: usize,
    /// Instances run concurrently.
    #[serde(default = "one")]
    pub jobs: usize,
}

#[derive(Args)]
pub struct BatchArgs {
    /// Experiment config (JSON).
    config: PathBuf,
    /// Results CSV; appended to when it exists.
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Summary CSV (default: `<out>.summary.csv`).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Per-agent payments CSV (default: `<out>.payments.csv`).
    #[arg(long)]
    payments: Option<PathBuf>,
    /// Overrides the config's `jobs`.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub map: String,
    pub layers: usize,
    pub n: usize,
    pub instance_seed: u64,
    pub mechanism: MechanismKind,
    pub m: usize,
    pub success: bool,
    pub runtime_s: Option<f64>,
    pub social_welfare: Option<f64>,
    pub sum_payments: Option<f64>,
    pub max_payment: Option<f64>,
    pub num_zero_payment_agents: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaymentRow {
    pub map: String,
    pub layers: usize,
    pub n: usize,
    pub instance_seed: u64,
    pub mechanism: MechanismKind,
    pub m: usize,
    pub agent: usize,
    pub payment: f64,
}

type Key = (usize, u64, MechanismKind, usize);

impl ResultRow {
    fn key(&self) -> Key {
        (self.n, self.instance_seed, self.mechanism, self.m)
    }
}

impl PaymentRow {
    fn key(&self) -> Key {
        (self.n, self.instance_seed, self.mechanism, self.m)
    }
}

/// Seed of the `k`-th instance with `n` agents. Adding agent counts or
/// instances never changes existing seeds.
pub fn instance_seed(master: u64, n: usize, k: usize) -> u64 {
    derive_seed(master, "instance", ((n as u64) << 32) | k as u64)
}

fn sibling(out: &FsPath, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "results".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn io_err(path: &FsPath) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Rows of an existing CSV written by this tool; empty if the file is absent.
pub fn read_rows<T: for<'de> Deserialize<'de>>(path: &FsPath, header: &str) -> Result<Vec<T>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = common::read(path)?;
    if !text.starts_with(header) {
        return Err(CliError::Config(format!("{} was not written by this version (expected {header:?})", path.display())));
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    Ok(reader.deserialize().collect::<Result<_, _>>()?)
}

/// Appends rows, creating the file with its comment and column lines first.
fn append_rows<T: Serialize>(path: &FsPath, header: &str, columns: &str, rows: &[T]) -> Result<(), CliError> {
    let fresh = !path.exists();
    let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err(path))?;
    if fresh {
        writeln!(file, "{header}\n{columns}").map_err(io_err(path))?;
    }
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        writer.serialize(r)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Config(e.to_string()))?;
    file.write_all(&bytes).map_err(io_err(path))
}

struct Task {
    n: usize,
    seed: u64,
    runs: Vec<(MechanismKind, usize)>,
}

fn run_task(world: &mapf_mech::GridWorld, name: &str, config: &ExperimentConfig, task: &Task) -> Result<(Vec<ResultRow>, Vec<PaymentRow>), CliError> {
    let mut instance: Instance = sample_instance(world, task.n, task.seed, &config.sampling)?;
    instance.map_name = name.to_owned();
    let reports = instance.truthful();
    let limit = common::time_limit(config.time_limit_s)?;
    let mut rows = Vec::new();
    let mut payments = Vec::new();
    for &(kind, samples) in &task.runs {
        let spec = common::spec_for(kind, samples, task.seed, config.threads);
        let m = common::m_column(kind, samples);
        let outcome = mechanism::run(world, &reports, &spec, limit);
        let base = ResultRow {
            map: name.to_owned(),
            layers: config.layers,
            n: task.n,
            instance_seed: task.seed,
            mechanism: kind,
            m,
            success: false,
            runtime_s: None,
            social_welfare: None,
            sum_payments: None,
            max_payment: None,
            num_zero_payment_agents: None,
        };
        match outcome {
            Ok(o) => {
                if kind != MechanismKind::Fcfs {
                    payments.extend(o.payments.iter().enumerate().map(|(agent, &payment)| PaymentRow {
                        map: name.to_owned(),
                        layers: config.layers,
                        n: task.n,
                        instance_seed: task.seed,
                        mechanism: kind,
                        m,
                        agent,
                        payment,
                    }));
                }
                rows.push(solved_row(base, &o, config.record_runtime));
            }
            Err(t) => rows.push(ResultRow {
                runtime_s: config.record_runtime.then_some(t.limit_s),
                ..base
            }),
        }
    }
    Ok((rows, payments))
}

fn solved_row(base: ResultRow, o: &MechanismOutcome, record_runtime: bool) -> ResultRow {
    ResultRow {
        success: true,
        runtime_s: record_runtime.then_some(o.stats.runtime_s),
        social_welfare: Some(o.social_welfare()),
        sum_payments: Some(o.sum_payments()),
        max_payment: Some(o.max_payment()),
        num_zero_payment_agents: Some(o.zero_payment_agents()),
        ..base
    }
}

pub fn load_config(path: &FsPath) -> Result<ExperimentConfig, CliError> {
    let mut config: ExperimentConfig =
        serde_json::from_str(&common::read(path)?).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if config.map.is_relative() {
        if let Some(dir) = path.parent() {
            config.map = dir.join(&config.map);
        }
    }
    if config.samples.contains(&0) {
        return Err(CliError::Config("MCPP sample counts must be at least 1".into()));
    }
    Ok(config)
}

pub fn cmd_batch(args: &BatchArgs) -> Result<(), CliError> {
    let mut config = load_config(&args.config)?;
    if let Some(jobs) = args.jobs {
        config.jobs = jobs;
    }
    let world = common::load_world(&config.map, config.layers)?;
    let name = common::map_name(&config.map);
    let summary_path = args.summary.clone().unwrap_or_else(|| sibling(&args.out, "summary"));
    let payments_path = args.payments.clone().unwrap_or_else(|| sibling(&args.out, "payments"));
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }

    let done: BTreeSet<Key> = read_rows::<ResultRow>(&args.out, RESULTS_HEADER)?.iter().map(ResultRow::key).collect();
    let paid: BTreeSet<Key> = read_rows::<PaymentRow>(&payments_path, PAYMENTS_HEADER)?.iter().map(PaymentRow::key).collect();

    let mut tasks = Vec::new();
    for &n in &config.agents {
        for k in 0..config.instances {
            let seed = instance_seed(config.seed, n, k);
            let runs: Vec<(MechanismKind, usize)> = config
                .mechanisms
                .iter()
                .flat_map(|&kind| {
                    let sweep = if kind == MechanismKind::Mcpp { config.samples.clone() } else { vec![1] };
                    sweep.into_iter().map(move |s| (kind, s))
                })
                .filter(|&(kind, s)| !done.contains(&(n, seed, kind, common::m_column(kind, s))))
                .collect();
            if !runs.is_empty() {
                tasks.push(Task { n, seed, runs });
            }
        }
    }

    // Fresh files get their headers even when nothing is left to run.
    append_rows::<ResultRow>(&args.out, RESULTS_HEADER, RESULTS_COLUMNS, &[])?;
    append_rows::<PaymentRow>(&payments_path, PAYMENTS_HEADER, PAYMENTS_COLUMNS, &[])?;
    for batch in tasks.chunks(config.jobs.max(1)) {
        let results: Vec<Result<_, CliError>> = thread::scope(|s| {
            let handles: Vec<_> = batch.iter().map(|t| s.spawn(|| run_task(&world, &name, &config, t))).collect();
            handles.into_iter().map(|h| h.join().expect("batch worker panicked")).collect()
        });
        for r in results {
            let (rows, payments) = r?;
            let payments: Vec<PaymentRow> = payments.into_iter().filter(|p| !paid.contains(&p.key())).collect();
            append_rows(&payments_path, PAYMENTS_HEADER, PAYMENTS_COLUMNS, &payments)?;
            append_rows(&args.out, RESULTS_HEADER, RESULTS_COLUMNS, &rows)?;
        }
    }

    let rows: Vec<ResultRow> = read_rows(&args.out, RESULTS_HEADER)?;
    common::write(&summary_path, &summary::render(&rows)?)?;
    Ok(())
}
