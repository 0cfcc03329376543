//! Welfare-maximising conflict-based search.
//!
//! Best-first over constraint-tree nodes by social welfare. An agent whose
//! best constrained path would earn no positive welfare is given the empty
//! path instead: she contributes nothing and occupies no space. Children only
//! add constraints, so a node's welfare bounds every node below it and the
//! first conflict-free node popped is welfare-optimal.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::assignment::{Assignment, AssignmentSource, Deadline, Timeout};
use crate::grid::GridWorld;
use crate::instance::ReportProfile;
use crate::path::{find_first_conflict, welfare, Conflict, Path};
use crate::planner::{ConstraintSet, ReservationTable, SpaceTimePlanner};

#[derive(Clone, Debug)]
pub struct CbsNode {
    pub constraints: Vec<Arc<ConstraintSet>>,
    pub paths: Vec<Option<Arc<Path>>>,
    pub welfare: f64,
    pub first_conflict: Option<Conflict>,
    pub creation_index: usize,
}

struct Ranked(CbsNode);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .welfare
            .total_cmp(&other.0.welfare)
            .then(other.0.creation_index.cmp(&self.0.creation_index))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug)]
pub struct CbsSolution {
    pub assignment: Assignment,
    pub nodes_expanded: usize,
    pub nodes_generated: usize,
}

struct Search<'a> {
    planner: &'a SpaceTimePlanner<'a>,
    reports: &'a ReportProfile,
    empty_table: ReservationTable,
}

impl Search<'_> {
    /// Best path under `constraints`, or `None` when it earns no welfare.
    fn plan(&self, agent: usize, constraints: &ConstraintSet) -> Option<Arc<Path>> {
        let report = self.reports.get(agent);
        let path = self.planner.plan(report, constraints, &self.empty_table, constraints.latest())?;
        (welfare(Some(&path), report) > 0.0).then(|| Arc::new(path))
    }

    fn node(&self, constraints: Vec<Arc<ConstraintSet>>, paths: Vec<Option<Arc<Path>>>, creation_index: usize) -> CbsNode {
        let welfare = paths
            .iter()
            .zip(self.reports.agents())
            .map(|(p, a)| welfare(p.as_deref(), a))
            .sum();
        let first_conflict = find_first_conflict(&paths);
        CbsNode {
            constraints,
            paths,
            welfare,
            first_conflict,
            creation_index,
        }
    }
}

/// Splits a conflict into the constraint each of its two agents receives.
fn branches(conflict: &Conflict) -> [(usize, Constraint); 2] {
    match *conflict {
        Conflict::Vertex { a, b, vertex, time } => [
            (a, Constraint::Vertex(vertex, time)),
            (b, Constraint::Vertex(vertex, time)),
        ],
        Conflict::Edge { a, b, from, to, time } => [
            (a, Constraint::Edge(from, to, time)),
            (b, Constraint::Edge(to, from, time)),
        ],
    }
}

#[derive(Copy, Clone)]
enum Constraint {
    Vertex(crate::grid::Vertex, usize),
    Edge(crate::grid::Vertex, crate::grid::Vertex, usize),
}

/// Finds an assignment maximising `Σ max(0, v̂ᵢ - ĉᵢ|πᵢ|)` over all
/// conflict-free assignments, empty paths allowed.
pub fn solve(world: &GridWorld, reports: &ReportProfile, deadline: &Deadline) -> Result<CbsSolution, Timeout> {
    let planner = SpaceTimePlanner::new(world);
    solve_with(&planner, reports, deadline)
}

pub fn solve_with(planner: &SpaceTimePlanner<'_>, reports: &ReportProfile, deadline: &Deadline) -> Result<CbsSolution, Timeout> {
    let search = Search {
        planner,
        reports,
        empty_table: ReservationTable::new(planner.world()),
    };
    let n = reports.len();
    let empty = Arc::new(ConstraintSet::new());
    let root_paths = (0..n).map(|i| search.plan(i, &empty)).collect();
    let root = search.node(vec![empty; n], root_paths, 0);

    let mut open = BinaryHeap::new();
    open.push(Ranked(root));
    let mut generated = 1;
    let mut expanded = 0;
    while let Some(Ranked(node)) = open.pop() {
        deadline.check()?;
        let Some(conflict) = node.first_conflict else {
            let paths = node.paths.iter().map(|p| p.as_deref().cloned()).collect();
            return Ok(CbsSolution {
                assignment: Assignment::new(paths, reports, AssignmentSource::Cbs),
                nodes_expanded: expanded,
                nodes_generated: generated,
            });
        };
        expanded += 1;
        for (agent, constraint) in branches(&conflict) {
            let mut constraints = node.constraints.clone();
            let set = Arc::make_mut(&mut constraints[agent]);
            match constraint {
                Constraint::Vertex(v, t) => set.forbid_vertex(v, t),
                Constraint::Edge(u, v, t) => set.forbid_edge(u, v, t),
            }
            let mut paths = node.paths.clone();
            paths[agent] = search.plan(agent, &constraints[agent]);
            let child = search.node(constraints, paths, generated);
            debug_assert!(child.welfare <= node.welfare + 1e-12);
            generated += 1;
            open.push(Ranked(child));
        }
    }
    unreachable!("the empty assignment is always conflict-free")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Cell;
    use crate::instance::AgentType;

    fn v(w: &GridWorld, x: usize, y: usize) -> crate::grid::Vertex {
        w.vertex_at(Cell::new(x, y, 0)).unwrap()
    }

    fn cross(w: &GridWorld, ca: f64, cb: f64) -> ReportProfile {
        ReportProfile::from_types(vec![
            AgentType::new(v(w, 0, 1), v(w, 2, 1), ca, 1.0),
            AgentType::new(v(w, 1, 0), v(w, 1, 2), cb, 1.0),
        ])
    }

    #[test]
    fn conflict_free_returns_isolated_paths() {
        let w = GridWorld::open(3, 3);
        let r = ReportProfile::from_types(vec![
            AgentType::new(v(&w, 0, 0), v(&w, 2, 0), 0.1, 1.0),
            AgentType::new(v(&w, 0, 2), v(&w, 2, 2), 0.2, 1.0),
        ]);
        let sol = solve(&w, &r, &Deadline::unlimited()).unwrap();
        assert_eq!(sol.nodes_expanded, 0);
        assert!((sol.assignment.social_welfare - (0.8 + 0.6)).abs() < 1e-12);
    }

    #[test]
    fn cross_instance_optimum() {
        let w = GridWorld::open(3, 3);
        let sol = solve(&w, &cross(&w, 0.1, 0.2), &Deadline::unlimited()).unwrap();
        let a = &sol.assignment;
        assert!((a.social_welfare - 1.3).abs() < 1e-12);
        assert!((a.welfare[0] - 0.7).abs() < 1e-12);
        assert!((a.welfare[1] - 0.6).abs() < 1e-12);
        assert!(find_first_conflict(&a.paths).is_none());
    }

    #[test]
    fn unprofitable_agent_opts_out() {
        let w = GridWorld::open(5, 1);
        let r = ReportProfile::from_types(vec![AgentType::new(v(&w, 0, 0), v(&w, 4, 0), 1.0, 0.1)]);
        let sol = solve(&w, &r, &Deadline::unlimited()).unwrap();
        assert_eq!(sol.assignment.paths[0], None);
        assert_eq!(sol.assignment.social_welfare, 0.0);
    }

    #[test]
    fn break_even_opts_out() {
        let w = GridWorld::open(5, 1);
        let r = ReportProfile::from_types(vec![AgentType::new(v(&w, 0, 0), v(&w, 4, 0), 0.25, 1.0)]);
        let sol = solve(&w, &r, &Deadline::unlimited()).unwrap();
        assert_eq!(sol.assignment.paths[0], None);
    }

    #[test]
    fn zero_limit_times_out() {
        let w = GridWorld::open(3, 3);
        let d = Deadline::new(Some(std::time::Duration::ZERO));
        assert!(solve(&w, &cross(&w, 0.1, 0.2), &d).is_err());
    }
}
