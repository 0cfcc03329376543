use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mapf_mech::cbs;
use mapf_mech::grid::random_grid;
use mapf_mech::instance::{sample_instance, Instance, SamplingConfig};
use mapf_mech::mechanism::{self, MechanismKind, MechanismSpec};
use mapf_mech::oracle::{self, JointLimits, MisreportGrid};
use mapf_mech::rng::derive_seed;
use mapf_mech::Deadline;
use serde::Serialize;
use serde_json::{json, Value};

use crate::common::{self, CliError};

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Strategyproofness on misreport grids.
    Sp,
    /// Individual rationality and non-negative payments.
    Ir,
    /// CBS against the brute-force joint search.
    Oracle,
    All,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value_t = Suite::All)]
    suite: Suite,
    /// Instances per suite (default: 20 for sp, 100 for ir, 50 for oracle).
    #[arg(long)]
    instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// MCPP sample count.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    /// Directory for counterexample files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Per-run wall-clock limit in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_limit: f64,
    /// Corrupt every computed payment (exercises the failure path).
    #[arg(long, hide = true)]
    inject_payment_fault: bool,
}

/// Small random instance; retries map seeds until the agents fit.
fn tiny_instance(side: usize, n: usize, seed: u64) -> Instance {
    (0..)
        .find_map(|attempt| {
            let world = random_grid(side, side, 0.2, derive_seed(seed, "verify-map", attempt));
            sample_instance(&world, n, seed, &SamplingConfig::default()).ok()
        })
        .expect("some map fits")
}

#[derive(Default, Serialize)]
struct SuiteReport {
    instances: usize,
    runs: usize,
    violations: Vec<Value>,
    inconclusive: usize,
    #[serde(skip)]
    counterexample: Option<(String, String)>,
}

impl SuiteReport {
    fn fail(&mut self, tag: String, instance: &Instance, mechanism: MechanismKind, detail: Value) {
        if self.counterexample.is_none() {
            self.counterexample = Some((tag, oracle::counterexample_json(instance, mechanism, &detail)));
        }
        self.violations.push(detail);
    }
}

fn suite_oracle(args: &VerifyArgs) -> SuiteReport {
    let mut report = SuiteReport::default();
    for k in 0..args.instances.unwrap_or(50) {
        let inst = tiny_instance(5, 1 + k % 3, derive_seed(args.seed, "verify-oracle", k as u64));
        let reports = inst.truthful();
        let cbs = cbs::solve(&inst.world, &reports, &Deadline::unlimited()).expect("no limit").assignment;
        let joint = oracle::joint_optimal(&inst.world, &reports, 20, JointLimits::default()).expect("within limits");
        report.instances += 1;
        report.runs += 1;
        if (cbs.social_welfare - joint.social_welfare).abs() > 1e-9 {
            let detail = json!({"instance": k, "cbs": cbs.social_welfare, "joint": joint.social_welfare});
            report.fail(format!("oracle-{k}"), &inst, MechanismKind::Pcbs, detail);
        }
    }
    report
}

fn payment_specs(samples: usize, seed: u64) -> [MechanismSpec; 3] {
    [MechanismSpec::pcbs(), MechanismSpec::epbs(), MechanismSpec::mcpp(samples, seed)]
}

fn suite_ir(args: &VerifyArgs) -> Result<SuiteReport, CliError> {
    let limit = common::time_limit(args.time_limit)?;
    let mut report = SuiteReport::default();
    for k in 0..args.instances.unwrap_or(100) {
        let seed = derive_seed(args.seed, "verify-ir", k as u64);
        let inst = tiny_instance(6, 2 + k % 3, seed);
        report.instances += 1;
        let specs = payment_specs(args.samples, seed);
        for spec in specs.iter().chain([&MechanismSpec::fcfs(seed)]) {
            let Ok(mut outcome) = mechanism::run(&inst.world, &inst.truthful(), spec, limit) else {
                report.inconclusive += 1;
                continue;
            };
            report.runs += 1;
            if args.inject_payment_fault {
                for p in &mut outcome.payments {
                    *p -= 0.01;
                }
            }
            let violations = oracle::verify_ir_and_payments(&outcome);
            if !violations.is_empty() {
                let detail = json!({"instance": k, "mechanism": spec.kind, "violations": violations});
                report.fail(format!("ir-{k}-{}", spec.kind), &inst, spec.kind, detail);
            }
        }
    }
    Ok(report)
}

fn suite_sp(args: &VerifyArgs) -> Result<SuiteReport, CliError> {
    let limit = common::time_limit(args.time_limit)?;
    let mut report = SuiteReport::default();
    for k in 0..args.instances.unwrap_or(20) {
        let seed = derive_seed(args.seed, "verify-sp", k as u64);
        let inst = tiny_instance(8, 2 + k % 3, seed);
        report.instances += 1;
        let grids: Vec<MisreportGrid> = (0..inst.num_agents()).map(MisreportGrid::new).collect();
        for spec in payment_specs(args.samples, seed) {
            let sp = oracle::verify_strategyproofness(&inst, &spec, &grids, limit).expect("payment mechanism");
            report.runs += sp.runs;
            report.inconclusive += sp.inconclusive.len();
            if !sp.violations.is_empty() {
                let detail = json!({"instance": k, "mechanism": spec.kind, "violations": sp.violations});
                report.fail(format!("sp-{k}-{}", spec.kind), &inst, spec.kind, detail);
            }
        }
    }
    Ok(report)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    let wants = |s: Suite| args.suite == s || args.suite == Suite::All;
    let mut reports: Vec<(&str, SuiteReport)> = Vec::new();
    if wants(Suite::Oracle) {
        reports.push(("oracle", suite_oracle(args)));
    }
    if wants(Suite::Ir) {
        reports.push(("ir", suite_ir(args)?));
    }
    if wants(Suite::Sp) {
        reports.push(("sp", suite_sp(args)?));
    }
    let summary: serde_json::Map<String, Value> = reports
        .iter()
        .map(|(name, r)| ((*name).to_owned(), serde_json::to_value(r).expect("report serializes")))
        .collect();
    println!("{}", serde_json::to_string_pretty(&summary).expect("report serializes"));

    let count: usize = reports.iter().map(|(_, r)| r.violations.len()).sum();
    if let Some((tag, text)) = reports.iter().find_map(|(_, r)| r.counterexample.as_ref()) {
        std::fs::create_dir_all(&args.out_dir).map_err(|source| CliError::Io {
            path: args.out_dir.clone(),
            source,
        })?;
        let path = args.out_dir.join(format!("counterexample-{tag}.json"));
        common::write(&path, text)?;
        return Err(CliError::Violation { count, path });
    }
    Ok(())
}
