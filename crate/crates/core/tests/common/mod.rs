#![allow(dead_code)]

use mapf_mech::grid::{random_grid, Cell, GridWorld, Vertex};
use mapf_mech::instance::{sample_instance, AgentType, Instance, ReportProfile, SamplingConfig};
use mapf_mech::path::Path;

/// Random instance with `n` agents on a `w × h` grid with some obstacles.
/// Retries grid seeds until the agents can be placed.
pub fn small_instance(w: usize, h: usize, n: usize, seed: u64) -> Instance {
    for attempt in 0.. {
        let world = random_grid(w, h, 0.2, seed.wrapping_mul(7919).wrapping_add(attempt));
        if let Ok(inst) = sample_instance(&world, n, seed, &SamplingConfig::default()) {
            return inst;
        }
    }
    unreachable!()
}

/// The two-agent instance where A crosses left-to-right through the centre
/// of a 3×3 grid and B top-to-bottom.
pub fn cross() -> Instance {
    let w = GridWorld::open(3, 3);
    let v = |x, y| w.vertex_at(Cell::new(x, y, 0)).unwrap();
    let agents = vec![
        AgentType::new(v(0, 1), v(2, 1), 0.1, 1.0),
        AgentType::new(v(1, 0), v(1, 2), 0.2, 1.0),
    ];
    Instance::new(w, agents, 0).unwrap()
}

/// Every agent's cost rate and value scaled by its own factor pair.
pub fn rescale(reports: &ReportProfile, factors: &[(f64, f64)]) -> ReportProfile {
    ReportProfile::from_types(
        reports
            .agents()
            .iter()
            .zip(factors)
            .map(|(a, &(fc, fv))| a.with_economics(a.cost_rate * fc, a.value * fv))
            .collect(),
    )
}

/// Occupied vertex of `p` at `t`, computed from first principles.
pub fn position(p: &Path, t: usize) -> Option<Vertex> {
    if t < p.delay || t > p.delay + p.moves.len() - 1 {
        None
    } else {
        Some(p.moves[t - p.delay])
    }
}

pub fn paths_of(a: &mapf_mech::Assignment) -> Vec<Option<Path>> {
    a.paths.clone()
}
