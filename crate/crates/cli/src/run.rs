use std::path::PathBuf;

use clap::Args;
use mapf_mech::instance::SamplingConfig;
use mapf_mech::mechanism::{self, MechanismKind};

use crate::common::{self, CliError, RunContext};

#[derive(Args)]
pub struct RunArgs {
    /// MovingAI `.map` file.
    #[arg(long)]
    map: PathBuf,
    /// Number of stacked copies of the map.
    #[arg(long, default_value_t = 1)]
    layers: usize,
    /// Native scenario JSON, or a MovingAI `.scen` file.
    #[arg(long, conflicts_with = "agents")]
    scenario: Option<PathBuf>,
    /// Number of randomly placed agents (or rows taken from a `.scen` file).
    #[arg(long)]
    agents: Option<usize>,
    /// Instance seed; also seeds MCPP and FCFS orderings.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    mechanism: MechanismKind,
    /// MCPP sample count.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    /// Wall-clock limit in seconds.
    #[arg(long, default_value_t = 3600.0)]
    time_limit: f64,
    /// Worker threads for MCPP samples.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Leave runtimes out so that repeated runs are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    if args.samples == 0 {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    let limit = common::time_limit(args.time_limit)?;
    let world = common::load_world(&args.map, args.layers)?;
    let instance = common::load_instance(
        &world,
        &common::map_name(&args.map),
        args.scenario.as_deref(),
        args.agents,
        args.seed,
        &SamplingConfig::default(),
    )?;
    let spec = common::spec_for(args.mechanism, args.samples, instance.seed, args.threads);
    let ctx = RunContext {
        instance: &instance,
        kind: args.mechanism,
        m: common::m_column(args.mechanism, args.samples),
        timing: !args.no_timing,
    };
    let result = mechanism::run(&instance.world, &instance.truthful(), &spec, limit);
    let record = match &result {
        Ok(outcome) => ctx.solved(outcome),
        Err(t) => ctx.timed_out(t.limit_s),
    };
    let json = serde_json::to_string_pretty(&record).expect("outcome serializes") + "\n";
    match &args.out {
        Some(path) => common::write(path, &json)?,
        None => print!("{json}"),
    }
    match result {
        Ok(_) => Ok(()),
        Err(t) => Err(CliError::Timeout {
            mechanism: args.mechanism,
            limit_s: t.limit_s,
        }),
    }
}
