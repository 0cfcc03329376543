use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use mapf_mech::grid::{load_map, GridWorld, MapError};
use mapf_mech::instance::{instance_from_endpoints, sample_instance, Instance, InstanceError, Placement, SamplingConfig};
use mapf_mech::mechanism::{MechanismKind, MechanismOutcome, MechanismSpec};
use mapf_mech::rng::derive_seed;
use mapf_mech::scenario::{load_scen, load_scenario, ScenarioError};
use serde::Serialize;
use thiserror::Error;

pub const OUTCOME_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("scenario: {0}")]
    Scenario(#[from] ScenarioError),
    #[error("instance: {0}")]
    Instance(#[from] InstanceError),
    #[error("config: {0}")]
    Config(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("timeout: {mechanism} exceeded the {limit_s} s limit")]
    Timeout { mechanism: MechanismKind, limit_s: f64 },
    #[error("violation: {count} property violation(s); counterexample written to {path}")]
    Violation { count: usize, path: PathBuf },
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Timeout { .. } => 2,
            CliError::Violation { .. } => 3,
            _ => 1,
        })
    }
}

pub fn read(path: &FsPath) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn write(path: &FsPath, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

pub fn load_world(map: &FsPath, layers: usize) -> Result<GridWorld, CliError> {
    let world = load_map(&read(map)?)?;
    Ok(if layers == 1 { world } else { world.stack(layers)? })
}

pub fn map_name(map: &FsPath) -> String {
    map.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Instance from a native scenario JSON, a MovingAI `.scen` file (first
/// `agents` rows, economics drawn from `seed`) or fresh random placement.
pub fn load_instance(
    world: &GridWorld,
    name: &str,
    scenario: Option<&FsPath>,
    agents: Option<usize>,
    seed: u64,
    sampling: &SamplingConfig,
) -> Result<Instance, CliError> {
    let mut instance = match scenario {
        Some(path) if path.extension().is_some_and(|e| e == "scen") => {
            let pairs = load_scen(&read(path)?, world)?;
            let n = agents.unwrap_or(pairs.len());
            if n > pairs.len() {
                return Err(CliError::Usage(format!("{} has only {} rows, {n} agents requested", path.display(), pairs.len())));
            }
            let mut inst = instance_from_endpoints(world, &pairs[..n], seed, sampling)?;
            inst.placement = Placement::Scenario;
            inst
        }
        Some(path) => load_scenario(&read(path)?, world)?,
        None => {
            let n = agents.ok_or_else(|| CliError::Usage("either --scenario or --agents is required".into()))?;
            sample_instance(world, n, seed, sampling)?
        }
    };
    if instance.map_name.is_empty() {
        instance.map_name = name.to_owned();
    }
    Ok(instance)
}

/// Mechanism parameters for one instance. MCPP and FCFS draw their orderings
/// from streams derived from the instance seed, and from different ones, so
/// the FCFS baseline is not simply MCPP's first sample.
pub fn spec_for(kind: MechanismKind, samples: usize, instance_seed: u64, threads: usize) -> MechanismSpec {
    match kind {
        MechanismKind::Pcbs => MechanismSpec::pcbs(),
        MechanismKind::Epbs => MechanismSpec::epbs(),
        MechanismKind::Mcpp => MechanismSpec::mcpp(samples, derive_seed(instance_seed, "mcpp", 0)).with_threads(threads),
        MechanismKind::Fcfs => MechanismSpec::fcfs(derive_seed(instance_seed, "fcfs", 0)),
    }
}

/// Value of the `m` column: sample count for MCPP, 1 for FCFS, 0 otherwise.
pub fn m_column(kind: MechanismKind, samples: usize) -> usize {
    match kind {
        MechanismKind::Mcpp => samples,
        MechanismKind::Fcfs => 1,
        _ => 0,
    }
}

pub fn time_limit(seconds: f64) -> Result<Option<Duration>, CliError> {
    if seconds.is_finite() && seconds > 0.0 {
        Ok(Some(Duration::from_secs_f64(seconds)))
    } else if seconds == f64::INFINITY {
        Ok(None)
    } else {
        Err(CliError::Usage(format!("time limit must be positive, got {seconds}")))
    }
}

#[derive(Serialize)]
pub struct PathRecord {
    pub delay: usize,
    pub moves: Vec<[usize; 3]>,
}

#[derive(Serialize)]
pub struct OutcomeStats {
    pub runtime_s: Option<f64>,
    pub nodes: usize,
    pub range_size: usize,
    pub samples: usize,
}

/// Outcome JSON. Everything except the runtime is a deterministic function of
/// the inputs.
#[derive(Serialize)]
pub struct OutcomeRecord {
    pub version: u32,
    pub mechanism: MechanismKind,
    pub map: String,
    pub layers: usize,
    pub n: usize,
    pub instance_seed: u64,
    pub m: usize,
    pub success: bool,
    pub runtime_s: Option<f64>,
    pub social_welfare: Option<f64>,
    pub welfare: Option<Vec<f64>>,
    pub payments: Option<Vec<f64>>,
    pub utilities: Option<Vec<f64>>,
    pub counterfactual_welfare: Option<Vec<f64>>,
    pub paths: Option<Vec<Option<PathRecord>>>,
    pub stats: Option<OutcomeStats>,
}

pub struct RunContext<'a> {
    pub instance: &'a Instance,
    pub kind: MechanismKind,
    pub m: usize,
    pub timing: bool,
}

impl RunContext<'_> {
    fn base(&self, success: bool, runtime_s: f64) -> OutcomeRecord {
        OutcomeRecord {
            version: OUTCOME_VERSION,
            mechanism: self.kind,
            map: self.instance.map_name.clone(),
            layers: self.instance.world.layers(),
            n: self.instance.num_agents(),
            instance_seed: self.instance.seed,
            m: self.m,
            success,
            runtime_s: self.timing.then_some(runtime_s),
            social_welfare: None,
            welfare: None,
            payments: None,
            utilities: None,
            counterfactual_welfare: None,
            paths: None,
            stats: None,
        }
    }

    pub fn solved(&self, o: &MechanismOutcome) -> OutcomeRecord {
        let world = &self.instance.world;
        let cell = |v| {
            let c = world.cell_of(v);
            [c.x, c.y, c.layer]
        };
        OutcomeRecord {
            social_welfare: Some(o.social_welfare()),
            welfare: Some(o.chosen.welfare.clone()),
            payments: Some(o.payments.clone()),
            utilities: Some(o.utilities.clone()),
            counterfactual_welfare: Some(o.counterfactual_welfare.clone()),
            paths: Some(
                o.chosen
                    .paths
                    .iter()
                    .map(|p| {
                        p.as_ref().map(|p| PathRecord {
                            delay: p.delay,
                            moves: p.moves.iter().map(|&v| cell(v)).collect(),
                        })
                    })
                    .collect(),
            ),
            stats: Some(OutcomeStats {
                runtime_s: self.timing.then_some(o.stats.runtime_s),
                nodes: o.stats.nodes,
                range_size: o.stats.range_size,
                samples: o.stats.samples,
            }),
            ..self.base(true, o.stats.runtime_s)
        }
    }

    /// A run that hit its limit counts the limit as its runtime.
    pub fn timed_out(&self, limit_s: f64) -> OutcomeRecord {
        let mut r = self.base(false, limit_s);
        r.runtime_s = Some(limit_s);
        r
    }
}
