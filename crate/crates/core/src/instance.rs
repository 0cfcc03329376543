//! Agent types, problem instances and report profiles.

use rand::Rng;
use rand_distr::{Distribution as _, LogNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridWorld, Vertex};
use crate::rng;

/// An agent's type: where she starts, where she wants to go, what each
/// timestep costs her and what arriving is worth.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentType {
    pub start: Vertex,
    pub goal: Vertex,
    pub cost_rate: f64,
    pub value: f64,
}

impl AgentType {
    pub fn new(start: Vertex, goal: Vertex, cost_rate: f64, value: f64) -> Self {
        AgentType {
            start,
            goal,
            cost_rate,
            value,
        }
    }

    /// Same endpoints, different cost rate and value.
    pub fn with_economics(self, cost_rate: f64, value: f64) -> Self {
        AgentType {
            cost_rate,
            value,
            ..self
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("cannot place {requested} agents: only {available} distinct cells available")]
    Capacity { requested: usize, available: usize },
    #[error("agent {agent}: no reachable start/goal pair found after {attempts} draws")]
    Unreachable { agent: usize, attempts: usize },
    #[error("agent {agent}: {reason}")]
    InvalidAgent { agent: usize, reason: String },
    #[error("invalid distribution: {0}")]
    Distribution(String),
    #[error("report profile has {found} agents, instance has {expected}")]
    ProfileLength { expected: usize, found: usize },
}

/// How the agents' start/goal pairs were obtained.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Fresh uniform placement drawn from the instance seed.
    #[default]
    Random,
    /// Taken from a MovingAI `.scen` file.
    Scenario,
    /// Read from a native scenario file with explicit types.
    Explicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub world: GridWorld,
    pub map_name: String,
    /// Index is the agent id; this order is the fixed lexicographic agent order.
    pub agents: Vec<AgentType>,
    pub seed: u64,
    pub placement: Placement,
}

impl Instance {
    pub fn new(world: GridWorld, agents: Vec<AgentType>, seed: u64) -> Result<Self, InstanceError> {
        for (i, a) in agents.iter().enumerate() {
            validate_agent(&world, i, a)?;
        }
        Ok(Instance {
            world,
            map_name: String::new(),
            agents,
            seed,
            placement: Placement::Explicit,
        })
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn truthful(&self) -> ReportProfile {
        ReportProfile {
            reported: self.agents.clone(),
        }
    }
}

fn validate_agent(world: &GridWorld, i: usize, a: &AgentType) -> Result<(), InstanceError> {
    let n = world.num_vertices() as u32;
    if a.start.0 >= n || a.goal.0 >= n {
        return Err(InstanceError::InvalidAgent {
            agent: i,
            reason: "start or goal is not a vertex of the world".into(),
        });
    }
    check_economics(i, a.cost_rate, a.value)
}

fn check_economics(i: usize, cost_rate: f64, value: f64) -> Result<(), InstanceError> {
    if !(cost_rate.is_finite() && cost_rate >= 0.0 && value.is_finite() && value >= 0.0) {
        return Err(InstanceError::InvalidAgent {
            agent: i,
            reason: format!("cost rate {cost_rate} and value {value} must be finite and non-negative"),
        });
    }
    Ok(())
}

/// What the agents told the mechanism. Starts and goals always match the
/// instance; only cost rates and values can differ from the truth.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportProfile {
    reported: Vec<AgentType>,
}

impl ReportProfile {
    pub fn new(instance: &Instance, reported: Vec<AgentType>) -> Result<Self, InstanceError> {
        if reported.len() != instance.agents.len() {
            return Err(InstanceError::ProfileLength {
                expected: instance.agents.len(),
                found: reported.len(),
            });
        }
        for (i, (r, t)) in reported.iter().zip(&instance.agents).enumerate() {
            if r.start != t.start || r.goal != t.goal {
                return Err(InstanceError::InvalidAgent {
                    agent: i,
                    reason: "reported start/goal differ from the instance".into(),
                });
            }
            check_economics(i, r.cost_rate, r.value)?;
        }
        Ok(ReportProfile { reported })
    }

    /// Profile over an arbitrary agent list, e.g. an instance with one agent
    /// removed.
    pub fn from_types(reported: Vec<AgentType>) -> Self {
        ReportProfile { reported }
    }

    pub fn len(&self) -> usize {
        self.reported.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reported.is_empty()
    }

    pub fn agents(&self) -> &[AgentType] {
        &self.reported
    }

    pub fn get(&self, i: usize) -> &AgentType {
        &self.reported[i]
    }

    /// Replaces agent `i`'s cost rate and value.
    pub fn with_report(&self, i: usize, cost_rate: f64, value: f64) -> Result<Self, InstanceError> {
        check_economics(i, cost_rate, value)?;
        let mut reported = self.reported.clone();
        reported[i] = reported[i].with_economics(cost_rate, value);
        Ok(ReportProfile { reported })
    }

    /// Profile of everyone except agent `i`, in the original relative order.
    pub fn without(&self, i: usize) -> Self {
        let mut reported = self.reported.clone();
        reported.remove(i);
        ReportProfile { reported }
    }
}

/// A value or cost-rate distribution.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Uniform { lo: f64, hi: f64 },
    /// Cost rate drawn from `U(0, value / dist(start, goal))`. Only valid for
    /// costs.
    CoupledUniform,
    LogNormal { mu: f64, sigma: f64 },
    Constant { value: f64 },
}

impl Distribution {
    fn validate(&self, for_cost: bool) -> Result<(), InstanceError> {
        let bad = |msg: String| Err(InstanceError::Distribution(msg));
        match *self {
            Distribution::Uniform { lo, hi } if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) => {
                bad(format!("uniform({lo}, {hi}) needs 0 <= lo <= hi"))
            }
            Distribution::CoupledUniform if !for_cost => bad("coupled uniform is only defined for costs".into()),
            Distribution::LogNormal { mu, sigma } if !(mu.is_finite() && sigma.is_finite() && sigma >= 0.0) => {
                bad(format!("lognormal({mu}, {sigma}) needs finite mu and sigma >= 0"))
            }
            Distribution::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                bad(format!("constant {value} must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, value: f64, dist: u32) -> f64 {
        match *self {
            Distribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Distribution::CoupledUniform => {
                if dist == 0 {
                    0.0
                } else {
                    value / dist as f64 * rng.random::<f64>()
                }
            }
            Distribution::LogNormal { mu, sigma } => LogNormal::new(mu, sigma).expect("validated").sample(rng),
            Distribution::Constant { value } => value,
        }
    }
}

/// Value and cost distributions for instance generation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub value: Distribution,
    pub cost: Distribution,
}

impl Default for SamplingConfig {
    /// Values from `U(0, 1)`, cost rates from `U(0, v / dist)`.
    fn default() -> Self {
        SamplingConfig {
            value: Distribution::Uniform { lo: 0.0, hi: 1.0 },
            cost: Distribution::CoupledUniform,
        }
    }
}

impl SamplingConfig {
    /// Every value 0, every cost rate 1: the uncapped welfare of an
    /// assignment is then minus its flowtime.
    pub fn flowtime() -> Self {
        SamplingConfig {
            value: Distribution::Constant { value: 0.0 },
            cost: Distribution::Constant { value: 1.0 },
        }
    }

    fn validate(&self) -> Result<(), InstanceError> {
        self.value.validate(false)?;
        self.cost.validate(true)
    }
}

const PLACEMENT_ATTEMPTS: usize = 1000;

/// Draws `n` agents with pairwise-distinct starts, pairwise-distinct goals and
/// reachable goals, then their values and cost rates.
pub fn sample_instance(world: &GridWorld, n: usize, seed: u64, sampling: &SamplingConfig) -> Result<Instance, InstanceError> {
    sampling.validate()?;
    let available = world.num_vertices();
    if n > available || (n > 0 && available < 2) {
        return Err(InstanceError::Capacity {
            requested: n,
            available,
        });
    }
    let mut rng = rng::stream(seed, "placement", 0);
    let mut free_starts: Vec<Vertex> = world.vertices().collect();
    let mut free_goals = free_starts.clone();
    let mut endpoints = Vec::with_capacity(n);
    for agent in 0..n {
        let mut placed = false;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let si = rng.random_range(0..free_starts.len());
            let gi = rng.random_range(0..free_goals.len());
            let (s, g) = (free_starts[si], free_goals[gi]);
            if s == g {
                continue;
            }
            if let Some(d) = world.isolated_distance(s, g) {
                free_starts.swap_remove(si);
                free_goals.swap_remove(gi);
                endpoints.push((s, g, d));
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(InstanceError::Unreachable {
                agent,
                attempts: PLACEMENT_ATTEMPTS,
            });
        }
    }
    let agents = draw_economics(&endpoints, seed, sampling);
    Ok(Instance {
        world: world.clone(),
        map_name: String::new(),
        agents,
        seed,
        placement: Placement::Random,
    })
}

/// Instance over fixed start/goal pairs (e.g. from a `.scen` file) with values
/// and cost rates drawn from `seed`.
pub fn instance_from_endpoints(
    world: &GridWorld,
    endpoints: &[(Vertex, Vertex)],
    seed: u64,
    sampling: &SamplingConfig,
) -> Result<Instance, InstanceError> {
    sampling.validate()?;
    let mut with_dist = Vec::with_capacity(endpoints.len());
    for (agent, &(s, g)) in endpoints.iter().enumerate() {
        let d = world.isolated_distance(s, g).ok_or_else(|| InstanceError::InvalidAgent {
            agent,
            reason: "goal unreachable from start".into(),
        })?;
        with_dist.push((s, g, d));
    }
    let agents = draw_economics(&with_dist, seed, sampling);
    Ok(Instance {
        world: world.clone(),
        map_name: String::new(),
        agents,
        seed,
        placement: Placement::Scenario,
    })
}

fn draw_economics(endpoints: &[(Vertex, Vertex, u32)], seed: u64, sampling: &SamplingConfig) -> Vec<AgentType> {
    endpoints
        .iter()
        .enumerate()
        .map(|(i, &(start, goal, dist))| {
            let value = sampling.value.draw(&mut rng::stream(seed, "value", i as u64), 0.0, dist);
            let cost_rate = sampling.cost.draw(&mut rng::stream(seed, "cost", i as u64), value, dist);
            AgentType::new(start, goal, cost_rate, value)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;

    #[test]
    fn fixed_seed_is_reproducible() {
        let w = GridWorld::open(3, 3);
        let a = sample_instance(&w, 1, 7, &SamplingConfig::default()).unwrap();
        let b = sample_instance(&w, 1, 7, &SamplingConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.agents[0].value.to_bits(), b.agents[0].value.to_bits());
    }

    #[test]
    fn default_distributions_bound_isolated_cost() {
        let w = crate::grid::random_grid(10, 10, 0.2, 5);
        for seed in 0..20 {
            let inst = sample_instance(&w, 12, seed, &SamplingConfig::default()).unwrap();
            for a in &inst.agents {
                let d = w.isolated_distance(a.start, a.goal).unwrap() as f64;
                assert!(a.cost_rate >= 0.0);
                assert!(a.cost_rate * d <= a.value, "{a:?}");
                assert!(a.value <= 1.0);
            }
        }
    }

    #[test]
    fn distinct_starts_and_goals() {
        let w = GridWorld::open(4, 4);
        let inst = sample_instance(&w, 16, 3, &SamplingConfig::default()).unwrap();
        let mut starts: Vec<_> = inst.agents.iter().map(|a| a.start).collect();
        let mut goals: Vec<_> = inst.agents.iter().map(|a| a.goal).collect();
        starts.sort();
        starts.dedup();
        goals.sort();
        goals.dedup();
        assert_eq!(starts.len(), 16);
        assert_eq!(goals.len(), 16);
        assert!(inst.agents.iter().all(|a| a.start != a.goal));
    }

    #[test]
    fn capacity_error() {
        let w = GridWorld::open(2, 2);
        assert_eq!(
            sample_instance(&w, 5, 0, &SamplingConfig::default()),
            Err(InstanceError::Capacity {
                requested: 5,
                available: 4
            })
        );
    }

    #[test]
    fn unreachable_pairs_exhaust_retries() {
        // Two isolated cells: every distinct pair is unreachable.
        let w = crate::grid::load_map("type octile\nheight 1\nwidth 3\nmap\n.@.\n").unwrap();
        assert!(matches!(
            sample_instance(&w, 1, 0, &SamplingConfig::default()),
            Err(InstanceError::Unreachable { agent: 0, .. })
        ));
    }

    #[test]
    fn flowtime_preset() {
        let w = GridWorld::open(5, 5);
        let inst = sample_instance(&w, 4, 1, &SamplingConfig::flowtime()).unwrap();
        assert!(inst.agents.iter().all(|a| a.value == 0.0 && a.cost_rate == 1.0));
    }

    #[test]
    fn lognormal_draws_are_positive() {
        let w = GridWorld::open(5, 5);
        let cfg = SamplingConfig {
            value: Distribution::LogNormal { mu: 0.0, sigma: 1.0 },
            cost: Distribution::LogNormal { mu: 0.0, sigma: 0.5 },
        };
        let inst = sample_instance(&w, 6, 2, &cfg).unwrap();
        assert!(inst.agents.iter().all(|a| a.value > 0.0 && a.cost_rate > 0.0));
    }

    #[test]
    fn bad_distributions_rejected() {
        let w = GridWorld::open(3, 3);
        let cfg = SamplingConfig {
            value: Distribution::CoupledUniform,
            cost: Distribution::CoupledUniform,
        };
        assert!(matches!(sample_instance(&w, 1, 0, &cfg), Err(InstanceError::Distribution(_))));
        let cfg = SamplingConfig {
            value: Distribution::Uniform { lo: 1.0, hi: 0.0 },
            ..SamplingConfig::default()
        };
        assert!(sample_instance(&w, 1, 0, &cfg).is_err());
    }

    #[test]
    fn report_profiles_keep_endpoints() {
        let w = GridWorld::open(3, 3);
        let inst = sample_instance(&w, 2, 4, &SamplingConfig::default()).unwrap();
        let truth = inst.truthful();
        let lie = truth.with_report(1, 5.0, 0.1).unwrap();
        assert_eq!(lie.get(1).start, inst.agents[1].start);
        assert_eq!(lie.get(1).cost_rate, 5.0);
        assert!(truth.with_report(0, -1.0, 1.0).is_err());

        let mut moved = inst.agents.clone();
        moved[0].goal = w.vertex_at(Cell::new(1, 1, 0)).unwrap();
        if moved[0].goal != inst.agents[0].goal {
            assert!(ReportProfile::new(&inst, moved).is_err());
        }
        assert_eq!(truth.without(0).agents(), &inst.agents[1..]);
    }
}
