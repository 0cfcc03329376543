//! Scenario files: the native JSON format carrying explicit agent types, and
//! MovingAI `.scen` files carrying start/goal pairs only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, GridWorld, Vertex};
use crate::instance::{AgentType, Instance, InstanceError, Placement};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported scenario version {found}, expected {SCENARIO_VERSION}")]
    Version { found: u32 },
    #[error("scenario is for {found} layers, world has {expected}")]
    Layers { expected: usize, found: usize },
    #[error("duplicate agent id {0}")]
    DuplicateId(usize),
    #[error("agent ids must be 0..{n}, missing {missing}")]
    MissingId { n: usize, missing: usize },
    #[error("agent {agent}: {which} {cell} is not a passable cell")]
    Blocked {
        agent: usize,
        which: &'static str,
        cell: Cell,
    },
    #[error("line {line}: {reason}")]
    Scen { line: usize, reason: String },
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ScenarioFile {
    version: u32,
    map: String,
    layers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    agents: Vec<AgentRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct AgentRecord {
    id: usize,
    start: [usize; 3],
    goal: [usize; 3],
    cost: f64,
    value: f64,
}

fn cell_array(c: Cell) -> [usize; 3] {
    [c.x, c.y, c.layer]
}

/// Serializes an instance to native scenario JSON.
pub fn save_scenario(instance: &Instance) -> String {
    let file = ScenarioFile {
        version: SCENARIO_VERSION,
        map: instance.map_name.clone(),
        layers: instance.world.layers(),
        seed: Some(instance.seed),
        agents: instance
            .agents
            .iter()
            .enumerate()
            .map(|(id, a)| AgentRecord {
                id,
                start: cell_array(instance.world.cell_of(a.start)),
                goal: cell_array(instance.world.cell_of(a.goal)),
                cost: a.cost_rate,
                value: a.value,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("scenario serializes")
}

/// Parses native scenario JSON against `world`.
pub fn load_scenario(text: &str, world: &GridWorld) -> Result<Instance, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.version != SCENARIO_VERSION {
        return Err(ScenarioError::Version { found: file.version });
    }
    if file.layers != world.layers() {
        return Err(ScenarioError::Layers {
            expected: world.layers(),
            found: file.layers,
        });
    }
    let n = file.agents.len();
    let mut slots: Vec<Option<AgentType>> = vec![None; n];
    for rec in &file.agents {
        let locate = |xyz: [usize; 3], which| {
            let cell = Cell::new(xyz[0], xyz[1], xyz[2]);
            world.vertex_at(cell).ok_or(ScenarioError::Blocked {
                agent: rec.id,
                which,
                cell,
            })
        };
        let start = locate(rec.start, "start")?;
        let goal = locate(rec.goal, "goal")?;
        if rec.id >= n {
            return Err(ScenarioError::MissingId {
                n,
                missing: (0..n).find(|i| !file.agents.iter().any(|r| r.id == *i)).unwrap_or(0),
            });
        }
        if slots[rec.id].is_some() {
            return Err(ScenarioError::DuplicateId(rec.id));
        }
        slots[rec.id] = Some(AgentType::new(start, goal, rec.cost, rec.value));
    }
    let agents = slots
        .into_iter()
        .enumerate()
        .map(|(i, a)| a.ok_or(ScenarioError::MissingId { n, missing: i }))
        .collect::<Result<Vec<_>, _>>()?;
    let mut instance = Instance::new(world.clone(), agents, file.seed.unwrap_or(0))?;
    instance.map_name = file.map;
    instance.placement = Placement::Explicit;
    Ok(instance)
}

/// Parses a MovingAI `.scen` file (version 1) into start/goal pairs on layer 0
/// of `world`, in file order.
pub fn load_scen(text: &str, world: &GridWorld) -> Result<Vec<(Vertex, Vertex)>, ScenarioError> {
    let mut out = Vec::new();
    let mut saw_version = false;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() {
            continue;
        }
        if !saw_version {
            let mut parts = content.split_whitespace();
            match (parts.next(), parts.next()) {
                (Some("version"), Some(v)) if v == "1" || v == "1.0" => {
                    saw_version = true;
                    continue;
                }
                _ => {
                    return Err(ScenarioError::Scen {
                        line,
                        reason: format!("expected `version 1` header, found {content:?}"),
                    })
                }
            }
        }
        let cols: Vec<&str> = content.split('\t').flat_map(|c| c.split_whitespace()).collect();
        if cols.len() < 8 {
            return Err(ScenarioError::Scen {
                line,
                reason: format!("expected at least 8 columns, found {}", cols.len()),
            });
        }
        let num = |i: usize| -> Result<usize, ScenarioError> {
            cols[i].parse().map_err(|_| ScenarioError::Scen {
                line,
                reason: format!("column {} is not a non-negative integer: {:?}", i + 1, cols[i]),
            })
        };
        let (sx, sy, gx, gy) = (num(4)?, num(5)?, num(6)?, num(7)?);
        let locate = |x, y, which: &str| {
            world.vertex_at(Cell::new(x, y, 0)).ok_or_else(|| ScenarioError::Scen {
                line,
                reason: format!("row {}: {which} ({x},{y}) is not a passable cell", out.len()),
            })
        };
        let start = locate(sx, sy, "start")?;
        let goal = locate(gx, gy, "goal")?;
        out.push((start, goal));
    }
    if !saw_version {
        return Err(ScenarioError::Scen {
            line: 1,
            reason: "empty scenario file".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::load_map;
    use crate::instance::{sample_instance, SamplingConfig};

    fn world() -> GridWorld {
        load_map("type octile\nheight 3\nwidth 3\nmap\n...\n.@.\n...\n").unwrap()
    }

    #[test]
    fn save_then_load_round_trips() {
        let w = world();
        let mut inst = sample_instance(&w, 3, 11, &SamplingConfig::default()).unwrap();
        inst.map_name = "tiny".into();
        inst.placement = Placement::Explicit;
        let text = save_scenario(&inst);
        let back = load_scenario(&text, &w).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn explicit_types_pass_through() {
        let text = r#"{ "version": 1, "map": "tiny", "layers": 1, "agents": [
            { "id": 1, "start": [2,0,0], "goal": [0,2,0], "cost": 0.25, "value": 0.75 },
            { "id": 0, "start": [0,0,0], "goal": [2,2,0], "cost": 0.1, "value": 1.0 } ] }"#;
        let inst = load_scenario(text, &world()).unwrap();
        assert_eq!(inst.agents.len(), 2);
        assert_eq!(inst.agents[0].cost_rate, 0.1);
        assert_eq!(inst.agents[0].value, 1.0);
        assert_eq!(inst.agents[1].cost_rate, 0.25);
        assert_eq!(inst.agents[1].value, 0.75);
        assert_eq!(inst.map_name, "tiny");
    }

    #[test]
    fn validation_errors() {
        let w = world();
        let v2 = r#"{ "version": 2, "map": "", "layers": 1, "agents": [] }"#;
        assert!(matches!(load_scenario(v2, &w), Err(ScenarioError::Version { found: 2 })));
        let blocked = r#"{ "version": 1, "map": "", "layers": 1, "agents": [
            { "id": 0, "start": [1,1,0], "goal": [0,0,0], "cost": 0.1, "value": 1.0 } ] }"#;
        assert!(matches!(load_scenario(blocked, &w), Err(ScenarioError::Blocked { agent: 0, which: "start", .. })));
        let dup = r#"{ "version": 1, "map": "", "layers": 1, "agents": [
            { "id": 0, "start": [0,0,0], "goal": [2,2,0], "cost": 0.1, "value": 1.0 },
            { "id": 0, "start": [2,0,0], "goal": [0,2,0], "cost": 0.1, "value": 1.0 } ] }"#;
        assert!(matches!(load_scenario(dup, &w), Err(ScenarioError::DuplicateId(0))));
        let layers = r#"{ "version": 1, "map": "", "layers": 5, "agents": [] }"#;
        assert!(matches!(load_scenario(layers, &w), Err(ScenarioError::Layers { .. })));
    }

    #[test]
    fn scen_rows() {
        let w = world();
        let text = "version 1\n0\ttiny.map\t3\t3\t0\t0\t2\t2\t4\n0\ttiny.map\t3\t3\t2\t0\t0\t2\t4\n";
        let pairs = load_scen(text, &w).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(w.cell_of(pairs[1].0), Cell::new(2, 0, 0));

        let bad = "version 1\n0\ttiny.map\t3\t3\t0\t0\t2\t2\t4\n0\ttiny.map\t3\t3\t1\t1\t0\t2\t4\n";
        match load_scen(bad, &w) {
            Err(ScenarioError::Scen { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("row 1"), "{reason}");
            }
            other => panic!("expected row error, got {other:?}"),
        }
        assert!(load_scen("version 3\n", &w).is_err());
    }
}
