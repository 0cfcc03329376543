//! Brute-force reference solvers and empirical checks of the mechanisms'
//! incentive properties on small instances.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Duration;

use rustc_hash::FxHashMap;
use serde::Serialize;
use thiserror::Error;

use crate::assignment::{Assignment, AssignmentSource};
use crate::grid::{GridWorld, Vertex};
use crate::instance::{Instance, ReportProfile};
use crate::mechanism::{self, MechanismKind, MechanismOutcome, MechanismSpec, IR_TOLERANCE};
use crate::path::{welfare, Path};
use crate::priority::{all_orderings, prioritized_plan};
use crate::scenario::save_scenario;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("joint search refused: {agents} agents on {vertices} vertices exceeds the limit of {max_agents} agents / {max_vertices} vertices")]
    TooLarge {
        agents: usize,
        vertices: usize,
        max_agents: usize,
        max_vertices: usize,
    },
    #[error("ordering enumeration refused: {agents}! orderings exceeds the limit of {max_agents}!")]
    TooManyOrderings { agents: usize, max_agents: usize },
    #[error("{mechanism} is not a payment mechanism")]
    NotAMechanism { mechanism: MechanismKind },
}

/// Size guard for [`joint_optimal`].
#[derive(Copy, Clone, Debug)]
pub struct JointLimits {
    pub max_agents: usize,
    pub max_vertices: usize,
}

impl Default for JointLimits {
    fn default() -> Self {
        JointLimits {
            max_agents: 3,
            max_vertices: 25,
        }
    }
}

const GARAGE: u32 = 0;
const DONE: u32 = 1;

#[inline]
fn at(v: u32) -> u32 {
    v + 2
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    id: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.f.total_cmp(&self.f).then(other.id.cmp(&self.id))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Default)]
struct JointSearch {
    states: Vec<(Vec<u32>, usize)>,
    parent: Vec<usize>,
    best: FxHashMap<(Vec<u32>, usize), (f64, usize)>,
    open: BinaryHeap<Frontier>,
}

impl JointSearch {
    fn push(&mut self, status: Vec<u32>, t: usize, g: f64, h: f64, from: usize) {
        let key = (status, t);
        if matches!(self.best.get(&key), Some(&(old, _)) if old <= g) {
            return;
        }
        let id = self.states.len();
        self.states.push(key.clone());
        self.parent.push(from);
        self.best.insert(key, (g, id));
        self.open.push(Frontier { f: g + h, id });
    }
}

/// Maximum-welfare conflict-free assignment by exhaustive search over joint
/// states `(status₁ … statusₙ, t)` with status ∈ {garage, at v, done}.
///
/// Every agent first chooses to take part or to give up her value and stay
/// home. Each timestep costs `cᵢ` for every agent that has not yet arrived.
/// Schedules longer than `horizon` timesteps are not considered.
pub fn joint_optimal(world: &GridWorld, reports: &ReportProfile, horizon: usize, limits: JointLimits) -> Result<Assignment, OracleError> {
    let n = reports.len();
    if n > limits.max_agents || world.num_vertices() > limits.max_vertices {
        return Err(OracleError::TooLarge {
            agents: n,
            vertices: world.num_vertices(),
            max_agents: limits.max_agents,
            max_vertices: limits.max_vertices,
        });
    }
    let agents = reports.agents();
    let dist: Vec<Vec<u32>> = agents.iter().map(|a| world.distances_from(a.goal)).collect();
    let remaining = |i: usize, s: u32| -> f64 {
        let c = agents[i].cost_rate;
        match s {
            DONE => 0.0,
            GARAGE => c * (dist[i][agents[i].start.index()] as f64 + 1.0),
            s => c * dist[i][(s - 2) as usize] as f64,
        }
    };
    let arrived = |i: usize, s: u32| s == DONE || s == at(agents[i].goal.0);

    let mut search = JointSearch::default();
    let heuristic = |status: &[u32]| -> f64 { status.iter().enumerate().map(|(i, &s)| remaining(i, s)).sum() };

    // Initial choices: stay home (forfeit v), wait in the garage, or stand on
    // the start vertex at t = 0.
    let mut initial = vec![Vec::new()];
    for a in agents {
        let mut next = Vec::new();
        for partial in &initial {
            for s in [DONE, GARAGE, at(a.start.0)] {
                if s >= 2 && partial.contains(&s) {
                    continue;
                }
                let mut p: Vec<u32> = Vec::clone(partial);
                p.push(s);
                next.push(p);
            }
        }
        initial = next;
    }
    for status in initial {
        let forfeit: f64 = status
            .iter()
            .zip(agents)
            .filter(|(&s, _)| s == DONE)
            .map(|(_, a)| a.value)
            .sum();
        let h = heuristic(&status);
        search.push(status, 0, forfeit, h, usize::MAX);
    }

    let mut goal = None;
    while let Some(Frontier { id, .. }) = search.open.pop() {
        let (status, t) = search.states[id].clone();
        let (g, current) = search.best[&(status.clone(), t)];
        if current != id {
            continue;
        }
        if status.iter().all(|&s| s == DONE) {
            goal = Some(id);
            break;
        }
        if t >= horizon {
            continue;
        }
        let step: f64 = (0..n).filter(|&i| !arrived(i, status[i])).map(|i| agents[i].cost_rate).sum();
        let options: Vec<Vec<u32>> = (0..n)
            .map(|i| match status[i] {
                DONE => vec![DONE],
                GARAGE => vec![GARAGE, at(agents[i].start.0)],
                s if arrived(i, s) => vec![DONE],
                s => world.successors(Vertex(s - 2)).iter().map(|v| at(v.0)).collect(),
            })
            .collect();
        let mut successors = Vec::new();
        extend(&options, &status, &mut Vec::with_capacity(n), &mut |succ: &[u32]| successors.push(succ.to_vec()));
        for succ in successors {
            let h = heuristic(&succ);
            search.push(succ, t + 1, g + step, h, id);
        }
    }
    let goal = goal.expect("staying home is always feasible");

    let mut timeline = Vec::new();
    let mut cursor = goal;
    while cursor != usize::MAX {
        timeline.push(search.states[cursor].0.clone());
        cursor = search.parent[cursor];
    }
    timeline.reverse();
    let paths = (0..n)
        .map(|i| {
            let cells: Vec<(usize, Vertex)> = timeline
                .iter()
                .enumerate()
                .filter(|(_, s)| s[i] >= 2)
                .map(|(t, s)| (t, Vertex(s[i] - 2)))
                .collect();
            let &(delay, _) = cells.first()?;
            Some(Path::new(delay, cells.into_iter().map(|(_, v)| v).collect()))
        })
        .collect();
    Ok(Assignment::new(paths, reports, AssignmentSource::Oracle))
}

/// Calls `emit` for every combination of per-agent options without a vertex
/// or swap collision.
fn extend(options: &[Vec<u32>], from: &[u32], chosen: &mut Vec<u32>, emit: &mut impl FnMut(&[u32])) {
    let i = chosen.len();
    if i == options.len() {
        emit(chosen);
        return;
    }
    for &s in &options[i] {
        let collides = s >= 2
            && (0..i).any(|j| {
                let sj = chosen[j];
                sj == s || (from[i] >= 2 && from[i] == sj && from[j] == s && from[i] != s)
            });
        if !collides {
            chosen.push(s);
            extend(options, from, chosen, emit);
            chosen.pop();
        }
    }
}

#[derive(Clone, Debug)]
pub struct OrderingSearch {
    pub best: Assignment,
    /// Prioritized-planning welfare of every ordering, lexicographic order.
    pub welfare: Vec<f64>,
}

pub const MAX_ORDERING_AGENTS: usize = 6;

/// Prioritized planning on all `n!` orderings.
pub fn best_ordering(world: &GridWorld, reports: &ReportProfile) -> Result<OrderingSearch, OracleError> {
    let n = reports.len();
    if n > MAX_ORDERING_AGENTS {
        return Err(OracleError::TooManyOrderings {
            agents: n,
            max_agents: MAX_ORDERING_AGENTS,
        });
    }
    let mut best: Option<Assignment> = None;
    let mut all = Vec::new();
    for (k, order) in all_orderings(n).iter().enumerate() {
        let a = prioritized_plan(world, reports, order, k);
        all.push(a.social_welfare);
        if best.as_ref().is_none_or(|b| a.social_welfare > b.social_welfare) {
            best = Some(a);
        }
    }
    Ok(OrderingSearch {
        best: best.expect("at least one ordering"),
        welfare: all,
    })
}

pub const DEFAULT_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

/// Misreports of one agent: her true cost rate and value scaled by every
/// pair of factors.
#[derive(Clone, Debug)]
pub struct MisreportGrid {
    pub agent: usize,
    pub cost_factors: Vec<f64>,
    pub value_factors: Vec<f64>,
}

impl MisreportGrid {
    pub fn new(agent: usize) -> Self {
        MisreportGrid {
            agent,
            cost_factors: DEFAULT_FACTORS.to_vec(),
            value_factors: DEFAULT_FACTORS.to_vec(),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.cost_factors
            .iter()
            .flat_map(move |&c| self.value_factors.iter().map(move |&v| (c, v)))
    }
}

pub const SP_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Misreport {
    pub agent: usize,
    pub cost_factor: f64,
    pub value_factor: f64,
    /// True utility under the misreport minus true utility under the truth.
    pub gain: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SpReport {
    /// Largest gain per agent over the grid points that finished.
    pub max_gain: Vec<f64>,
    pub violations: Vec<Misreport>,
    /// Grid points whose run timed out, as `(agent, cost factor, value factor)`.
    pub inconclusive: Vec<(usize, f64, f64)>,
    pub runs: usize,
}

impl SpReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty() && self.inconclusive.is_empty()
    }
}

/// Agent `i`'s true utility: the true welfare of the path she was given
/// minus what she was charged.
pub fn true_utility(outcome: &MechanismOutcome, truth: &ReportProfile, i: usize) -> f64 {
    welfare(outcome.chosen.paths[i].as_ref(), truth.get(i)) - outcome.payments[i]
}

/// Runs `spec` with each agent's report replaced by every point of her grid
/// (everyone else truthful) and compares her true utility with the truthful
/// run. Only grid points are tried: this can refute strategyproofness but
/// not prove it.
pub fn verify_strategyproofness(
    instance: &Instance,
    spec: &MechanismSpec,
    grids: &[MisreportGrid],
    time_limit: Option<Duration>,
) -> Result<SpReport, OracleError> {
    verify_strategyproofness_observed(instance, spec, grids, time_limit, &mut |_| {})
}

/// As [`verify_strategyproofness`], handing every finished run to `observe`.
pub fn verify_strategyproofness_observed(
    instance: &Instance,
    spec: &MechanismSpec,
    grids: &[MisreportGrid],
    time_limit: Option<Duration>,
    observe: &mut dyn FnMut(&MechanismOutcome),
) -> Result<SpReport, OracleError> {
    if spec.kind == MechanismKind::Fcfs {
        return Err(OracleError::NotAMechanism { mechanism: spec.kind });
    }
    let world = &instance.world;
    let truth = instance.truthful();
    let mut report = SpReport {
        max_gain: vec![f64::NEG_INFINITY; truth.len()],
        ..SpReport::default()
    };
    let Ok(honest) = mechanism::run(world, &truth, spec, time_limit) else {
        for g in grids {
            report.inconclusive.extend(g.points().map(|(c, v)| (g.agent, c, v)));
        }
        return Ok(report);
    };
    report.runs += 1;
    observe(&honest);
    for g in grids {
        let i = g.agent;
        let baseline = true_utility(&honest, &truth, i);
        let t = truth.get(i);
        for (cf, vf) in g.points() {
            let reports = truth
                .with_report(i, t.cost_rate * cf, t.value * vf)
                .expect("scaled reports stay non-negative");
            let Ok(outcome) = mechanism::run(world, &reports, spec, time_limit) else {
                report.inconclusive.push((i, cf, vf));
                continue;
            };
            report.runs += 1;
            observe(&outcome);
            let gain = true_utility(&outcome, &truth, i) - baseline;
            report.max_gain[i] = report.max_gain[i].max(gain);
            if gain > SP_TOLERANCE {
                report.violations.push(Misreport {
                    agent: i,
                    cost_factor: cf,
                    value_factor: vf,
                    gain,
                });
            }
        }
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IrViolation {
    pub agent: usize,
    pub payment: f64,
    pub utility: f64,
}

/// Agents with a negative payment or negative utility beyond tolerance.
pub fn verify_ir_and_payments(outcome: &MechanismOutcome) -> Vec<IrViolation> {
    outcome
        .payments
        .iter()
        .zip(&outcome.utilities)
        .enumerate()
        .filter(|&(_, (&p, &u))| p < -IR_TOLERANCE || u < -IR_TOLERANCE)
        .map(|(agent, (&payment, &utility))| IrViolation { agent, payment, utility })
        .collect()
}

/// Self-contained record of a failed check: the instance as scenario JSON
/// plus what went wrong.
pub fn counterexample_json(instance: &Instance, mechanism: MechanismKind, detail: &impl Serialize) -> String {
    let scenario: serde_json::Value = serde_json::from_str(&save_scenario(instance)).expect("scenario is JSON");
    serde_json::to_string_pretty(&serde_json::json!({
        "mechanism": mechanism,
        "scenario": scenario,
        "detail": detail,
    }))
    .expect("counterexample serializes")
}
