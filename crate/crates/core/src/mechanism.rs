//! PCBS, EPBS, MCPP and the FCFS baseline.
//!
//! PCBS pays true VCG: every counterfactual re-solves the problem with the
//! agent removed. EPBS and MCPP are maximal in range: the range is built once,
//! independently of the reports, and each counterfactual re-maximises the
//! others' welfare over that same range.

use std::num::NonZeroUsize;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::assignment::{Assignment, Deadline, Timeout};
use crate::cbs;
use crate::grid::GridWorld;
use crate::instance::ReportProfile;
use crate::pbs;
use crate::planner::SpaceTimePlanner;
use crate::priority::{all_orderings, prioritized_plan_with, sample_orderings};

/// Payments this far below zero are floating-point noise and become 0.
pub const PAYMENT_CLAMP: f64 = 1e-12;
/// Tolerance of the individual-rationality and non-negativity checks.
pub const IR_TOLERANCE: f64 = 1e-9;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MechanismKind {
    Pcbs,
    Epbs,
    Mcpp,
    Fcfs,
}

impl MechanismKind {
    pub const ALL: [MechanismKind; 4] = [MechanismKind::Pcbs, MechanismKind::Epbs, MechanismKind::Mcpp, MechanismKind::Fcfs];

    pub fn name(self) -> &'static str {
        match self {
            MechanismKind::Pcbs => "pcbs",
            MechanismKind::Epbs => "epbs",
            MechanismKind::Mcpp => "mcpp",
            MechanismKind::Fcfs => "fcfs",
        }
    }
}

impl std::fmt::Display for MechanismKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for MechanismKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MechanismKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mechanism {s:?} (expected pcbs, epbs, mcpp or fcfs)"))
    }
}

/// Where MCPP's orderings come from.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    /// `samples` uniform orderings from the `seed` stream.
    Random { samples: usize, seed: u64 },
    /// All `n!` orderings in lexicographic order.
    Enumerate,
}

/// A fully specified mechanism.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MechanismSpec {
    pub kind: MechanismKind,
    /// MCPP only.
    pub sampling: Sampling,
    /// FCFS ordering seed.
    pub seed: u64,
    /// Worker threads for MCPP samples; results do not depend on it.
    pub threads: usize,
}

impl MechanismSpec {
    pub fn pcbs() -> Self {
        Self::of(MechanismKind::Pcbs, 0)
    }

    pub fn epbs() -> Self {
        Self::of(MechanismKind::Epbs, 0)
    }

    pub fn mcpp(samples: usize, seed: u64) -> Self {
        MechanismSpec {
            sampling: Sampling::Random { samples, seed },
            ..Self::of(MechanismKind::Mcpp, seed)
        }
    }

    pub fn mcpp_enumerate() -> Self {
        MechanismSpec {
            sampling: Sampling::Enumerate,
            ..Self::of(MechanismKind::Mcpp, 0)
        }
    }

    pub fn fcfs(seed: u64) -> Self {
        Self::of(MechanismKind::Fcfs, seed)
    }

    fn of(kind: MechanismKind, seed: u64) -> Self {
        MechanismSpec {
            kind,
            sampling: Sampling::Random { samples: 1, seed },
            seed,
            threads: 1,
        }
    }

    pub fn with_threads(self, threads: usize) -> Self {
        MechanismSpec {
            threads: threads.max(1),
            ..self
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub runtime_s: f64,
    /// CBS nodes expanded over all solves (PCBS) or tree nodes generated (EPBS).
    pub nodes: usize,
    /// Number of candidate assignments maximised over (EPBS/MCPP/FCFS).
    pub range_size: usize,
    pub samples: usize,
    pub success: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MechanismOutcome {
    pub kind: MechanismKind,
    pub chosen: Assignment,
    pub payments: Vec<f64>,
    /// Reported welfare minus payment.
    pub utilities: Vec<f64>,
    /// `ŵ₋ᵢ(d*₋ᵢ)` per agent.
    pub counterfactual_welfare: Vec<f64>,
    pub stats: RunStats,
}

impl MechanismOutcome {
    fn build(kind: MechanismKind, chosen: Assignment, counterfactual_welfare: Vec<f64>, stats: RunStats) -> Self {
        let payments: Vec<f64> = counterfactual_welfare
            .iter()
            .enumerate()
            .map(|(i, &w)| clamp_payment(i, w - chosen.welfare_without(i)))
            .collect();
        let utilities: Vec<f64> = chosen.welfare.iter().zip(&payments).map(|(w, p)| w - p).collect();
        for (i, &u) in utilities.iter().enumerate() {
            assert!(u >= -IR_TOLERANCE, "individual rationality violated for agent {i}: u = {u}");
        }
        MechanismOutcome {
            kind,
            chosen,
            payments,
            utilities,
            counterfactual_welfare,
            stats,
        }
    }

    pub fn social_welfare(&self) -> f64 {
        self.chosen.social_welfare
    }

    pub fn sum_payments(&self) -> f64 {
        // Folding from +0.0 keeps an empty sum from printing as -0.0.
        self.payments.iter().fold(0.0, |acc, p| acc + p)
    }

    pub fn max_payment(&self) -> f64 {
        self.payments.iter().copied().fold(0.0, f64::max)
    }

    pub fn zero_payment_agents(&self) -> usize {
        self.payments.iter().filter(|&&p| p == 0.0).count()
    }
}

fn clamp_payment(agent: usize, p: f64) -> f64 {
    if p < 0.0 {
        assert!(p >= -PAYMENT_CLAMP, "negative payment {p} for agent {agent}");
        0.0
    } else {
        p
    }
}

/// Index of the highest-welfare member; earliest on ties.
pub fn argmax_welfare(range: &[Assignment]) -> usize {
    assert!(!range.is_empty(), "empty range");
    let mut best = 0;
    for (k, a) in range.iter().enumerate().skip(1) {
        if a.social_welfare > range[best].social_welfare {
            best = k;
        }
    }
    best
}

/// Maximal-in-range choice with VCG-based payments: `d*` maximises reported
/// welfare over `range`, and agent `i` pays what the others lose relative to
/// the range member that is best for them.
pub fn select_in_range(kind: MechanismKind, range: Vec<Assignment>, stats: RunStats) -> MechanismOutcome {
    let best = argmax_welfare(&range);
    let n = range[best].num_agents();
    let counterfactual = (0..n)
        .map(|i| range.iter().map(|a| a.welfare_without(i)).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let chosen = range.into_iter().nth(best).expect("index in range");
    MechanismOutcome::build(kind, chosen, counterfactual, stats)
}

/// Runs `spec`, giving up after `time_limit`.
pub fn run(
    world: &GridWorld,
    reports: &ReportProfile,
    spec: &MechanismSpec,
    time_limit: Option<Duration>,
) -> Result<MechanismOutcome, Timeout> {
    let deadline = Deadline::new(time_limit);
    let planner = SpaceTimePlanner::new(world);
    let mut outcome = match spec.kind {
        MechanismKind::Pcbs => pcbs(&planner, reports, &deadline),
        MechanismKind::Epbs => epbs(&planner, reports, &deadline),
        MechanismKind::Mcpp => {
            let orderings = match spec.sampling {
                Sampling::Random { samples, seed } => {
                    assert!(samples >= 1, "MCPP needs at least one sample");
                    sample_orderings(reports.len(), samples, seed)
                }
                Sampling::Enumerate => all_orderings(reports.len()),
            };
            mcpp(&planner, reports, &orderings, spec.threads, &deadline)
        }
        MechanismKind::Fcfs => {
            let order = sample_orderings(reports.len(), 1, spec.seed).remove(0);
            let chosen = prioritized_plan_with(&planner, reports, &order, 0);
            let n = chosen.num_agents();
            let counterfactual = (0..n).map(|i| chosen.welfare_without(i)).collect();
            let stats = RunStats {
                range_size: 1,
                samples: 1,
                ..RunStats::default()
            };
            Ok(MechanismOutcome::build(MechanismKind::Fcfs, chosen, counterfactual, stats))
        }
    }?;
    outcome.stats.runtime_s = deadline.elapsed().as_secs_f64();
    outcome.stats.success = true;
    Ok(outcome)
}

pub fn run_pcbs(world: &GridWorld, reports: &ReportProfile, time_limit: Option<Duration>) -> Result<MechanismOutcome, Timeout> {
    run(world, reports, &MechanismSpec::pcbs(), time_limit)
}

pub fn run_epbs(world: &GridWorld, reports: &ReportProfile, time_limit: Option<Duration>) -> Result<MechanismOutcome, Timeout> {
    run(world, reports, &MechanismSpec::epbs(), time_limit)
}

pub fn run_mcpp(
    world: &GridWorld,
    reports: &ReportProfile,
    samples: usize,
    seed: u64,
    time_limit: Option<Duration>,
) -> Result<MechanismOutcome, Timeout> {
    run(world, reports, &MechanismSpec::mcpp(samples, seed), time_limit)
}

pub fn run_fcfs(world: &GridWorld, reports: &ReportProfile, seed: u64) -> MechanismOutcome {
    run(world, reports, &MechanismSpec::fcfs(seed), None).expect("FCFS has no time limit")
}

fn pcbs(planner: &SpaceTimePlanner<'_>, reports: &ReportProfile, deadline: &Deadline) -> Result<MechanismOutcome, Timeout> {
    let best = cbs::solve_with(planner, reports, deadline)?;
    let mut nodes = best.nodes_expanded;
    let mut counterfactual = Vec::with_capacity(reports.len());
    for i in 0..reports.len() {
        let without = cbs::solve_with(planner, &reports.without(i), deadline)?;
        nodes += without.nodes_expanded;
        counterfactual.push(without.assignment.social_welfare);
    }
    let stats = RunStats {
        nodes,
        ..RunStats::default()
    };
    Ok(MechanismOutcome::build(MechanismKind::Pcbs, best.assignment, counterfactual, stats))
}

/// The EPBS range: every leaf of the priority tree.
pub fn epbs_range(world: &GridWorld, reports: &ReportProfile, deadline: &Deadline) -> Result<Vec<Assignment>, Timeout> {
    Ok(pbs::exhaustive_pbs(world, reports, deadline)?.leaves)
}

fn epbs(planner: &SpaceTimePlanner<'_>, reports: &ReportProfile, deadline: &Deadline) -> Result<MechanismOutcome, Timeout> {
    let tree = pbs::exhaustive_pbs_with(planner, reports, deadline)?;
    let stats = RunStats {
        nodes: tree.nodes_generated,
        range_size: tree.leaves.len(),
        ..RunStats::default()
    };
    Ok(select_in_range(MechanismKind::Epbs, tree.leaves, stats))
}

/// The MCPP range: prioritized planning on each ordering, in order.
pub fn mcpp_range(world: &GridWorld, reports: &ReportProfile, orderings: &[Vec<usize>]) -> Vec<Assignment> {
    let planner = SpaceTimePlanner::new(world);
    plan_orderings(&planner, reports, orderings, 1, &Deadline::unlimited()).expect("no deadline")
}

fn plan_orderings(
    planner: &SpaceTimePlanner<'_>,
    reports: &ReportProfile,
    orderings: &[Vec<usize>],
    threads: usize,
    deadline: &Deadline,
) -> Result<Vec<Assignment>, Timeout> {
    let plan_chunk = |offset: usize, chunk: &[Vec<usize>]| -> Result<Vec<Assignment>, Timeout> {
        chunk
            .iter()
            .enumerate()
            .map(|(k, order)| {
                deadline.check()?;
                Ok(prioritized_plan_with(planner, reports, order, offset + k))
            })
            .collect()
    };
    let threads = threads.min(orderings.len()).max(1);
    if threads == 1 {
        return plan_chunk(0, orderings);
    }
    let chunk = orderings.len().div_ceil(threads);
    thread::scope(|s| {
        let handles: Vec<_> = orderings
            .chunks(chunk)
            .enumerate()
            .map(|(c, part)| s.spawn(move || plan_chunk(c * chunk, part)))
            .collect();
        let mut out = Vec::with_capacity(orderings.len());
        for h in handles {
            out.extend(h.join().expect("sample worker panicked")?);
        }
        Ok(out)
    })
}

fn mcpp(
    planner: &SpaceTimePlanner<'_>,
    reports: &ReportProfile,
    orderings: &[Vec<usize>],
    threads: usize,
    deadline: &Deadline,
) -> Result<MechanismOutcome, Timeout> {
    let range = plan_orderings(planner, reports, orderings, threads, deadline)?;
    let stats = RunStats {
        range_size: range.len(),
        samples: orderings.len(),
        ..RunStats::default()
    };
    Ok(select_in_range(MechanismKind::Mcpp, range, stats))
}

/// Available hardware parallelism, at least 1.
pub fn default_threads() -> usize {
    thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use crate::instance::AgentType;

    fn cross() -> (GridWorld, ReportProfile) {
        let w = GridWorld::open(3, 3);
        let v = |x, y| w.vertex_at(Cell::new(x, y, 0)).unwrap();
        let r = ReportProfile::from_types(vec![
            AgentType::new(v(0, 1), v(2, 1), 0.1, 1.0),
            AgentType::new(v(1, 0), v(1, 2), 0.2, 1.0),
        ]);
        (w, r)
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn cross_payments_agree_across_mechanisms() {
        let (w, r) = cross();
        let outcomes = [
            run_pcbs(&w, &r, None).unwrap(),
            run_epbs(&w, &r, None).unwrap(),
            run(&w, &r, &MechanismSpec::mcpp_enumerate(), None).unwrap(),
        ];
        for o in &outcomes {
            assert!(close(o.social_welfare(), 1.3), "{}: {}", o.kind, o.social_welfare());
            assert!(o.payments[0].abs() < 1e-12, "{}: p_A = {}", o.kind, o.payments[0]);
            assert!(close(o.payments[1], 0.1), "{}: p_B = {}", o.kind, o.payments[1]);
            assert!(o.stats.success);
        }
    }

    #[test]
    fn single_sample_has_no_payments() {
        let (w, r) = cross();
        let m = run_mcpp(&w, &r, 1, 5, None).unwrap();
        assert_eq!(m.payments, vec![0.0, 0.0]);
        let f = run_fcfs(&w, &r, 5);
        assert_eq!(m.chosen.paths, f.chosen.paths);
        assert_eq!(f.payments, vec![0.0, 0.0]);
    }

    #[test]
    fn threads_do_not_change_the_outcome() {
        let (w, r) = cross();
        let one = run(&w, &r, &MechanismSpec::mcpp(37, 2), None).unwrap();
        let many = run(&w, &r, &MechanismSpec::mcpp(37, 2).with_threads(4), None).unwrap();
        assert_eq!(one.chosen, many.chosen);
        assert_eq!(one.payments, many.payments);
    }

    #[test]
    fn ties_go_to_the_earliest_member() {
        let (_, r) = cross();
        let a = Assignment::new(vec![None, None], &r, crate::assignment::AssignmentSource::Oracle);
        assert_eq!(argmax_welfare(&[a.clone(), a]), 0);
    }

    #[test]
    fn small_negative_payments_clamp() {
        assert_eq!(clamp_payment(0, -1e-13), 0.0);
        assert_eq!(clamp_payment(0, 0.25), 0.25);
    }

    #[test]
    #[should_panic(expected = "negative payment")]
    fn large_negative_payments_panic() {
        clamp_payment(3, -1e-6);
    }

    #[test]
    fn parse_kind() {
        assert_eq!("MCPP".parse::<MechanismKind>(), Ok(MechanismKind::Mcpp));
        assert!("vcg".parse::<MechanismKind>().is_err());
    }
}
