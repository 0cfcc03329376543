//! Exhaustive priority-based search.
//!
//! Every collision between `i < j` splits a node into `j ≻ i` and `i ≻ j`.
//! The tree is expanded breadth-first until every node is collision-free; the
//! collision-free nodes (leaves) form the range that EPBS maximises over.
//! Neither the tree nor any path depends on reported costs or values.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::assignment::{Assignment, AssignmentSource, Deadline, Timeout};
use crate::grid::GridWorld;
use crate::instance::ReportProfile;
use crate::path::{find_first_conflict, Conflict, Path};
use crate::planner::{ConstraintSet, ReservationTable, SpaceTimePlanner};
use crate::priority::PriorityOrdering;

#[derive(Clone, Debug)]
pub struct PbsNode {
    pub ordering: PriorityOrdering,
    pub paths: Vec<Arc<Path>>,
    pub first_collision: Option<Conflict>,
    pub creation_index: usize,
}

impl PbsNode {
    pub fn is_leaf(&self) -> bool {
        self.first_collision.is_none()
    }

    fn assignment(&self, reports: &ReportProfile) -> Assignment {
        Assignment::new(
            self.paths.iter().map(|p| Some(Path::clone(p))).collect(),
            reports,
            AssignmentSource::Leaf {
                creation_index: self.creation_index,
            },
        )
    }
}

#[derive(Clone, Debug)]
pub struct PbsRange {
    pub leaves: Vec<Assignment>,
    /// Final orderings, aligned with `leaves`.
    pub orderings: Vec<PriorityOrdering>,
    pub nodes_generated: usize,
}

struct Tree<'a> {
    planner: &'a SpaceTimePlanner<'a>,
    reports: &'a ReportProfile,
    none: ConstraintSet,
}

impl Tree<'_> {
    /// Best path for `agent` given the current paths of everyone who
    /// dominates it.
    fn replan(&self, agent: usize, ordering: &PriorityOrdering, paths: &[Arc<Path>]) -> Path {
        let table = ReservationTable::from_paths(
            self.planner.world(),
            ordering.dominators(agent).map(|k| (k, paths[k].as_ref())),
        );
        self.planner
            .plan(self.reports.get(agent), &self.none, &table, 0)
            .unwrap_or_else(|| panic!("no path for agent {agent} behind its dominators: instance is not well-formed"))
    }

    fn root(&self) -> PbsNode {
        let ordering = PriorityOrdering::empty(self.reports.len());
        let paths: Vec<Arc<Path>> = (0..self.reports.len())
            .map(|i| Arc::new(self.replan(i, &ordering, &[])))
            .collect();
        let first_collision = find_first_conflict(&wrap(&paths));
        PbsNode {
            ordering,
            paths,
            first_collision,
            creation_index: 0,
        }
    }

    /// Child with `high ≻ low` added, or `None` if that contradicts the
    /// parent's ordering. `low` and everything it dominates are replanned in
    /// topological order, which keeps every path optimal with respect to its
    /// dominators.
    fn child(&self, parent: &PbsNode, high: usize, low: usize, creation_index: usize) -> Option<PbsNode> {
        let mut ordering = parent.ordering.clone();
        ordering.insert(high, low).ok()?;
        let mut affected = vec![false; ordering.num_agents()];
        affected[low] = true;
        for k in ordering.dominated(low) {
            affected[k] = true;
        }
        let mut paths = parent.paths.clone();
        for k in ordering.topological_order() {
            if affected[k] {
                let fresh = self.replan(k, &ordering, &paths);
                if *paths[k] != fresh {
                    paths[k] = Arc::new(fresh);
                }
            }
        }
        let first_collision = find_first_conflict(&wrap(&paths));
        Some(PbsNode {
            ordering,
            paths,
            first_collision,
            creation_index,
        })
    }
}

fn wrap(paths: &[Arc<Path>]) -> Vec<Option<&Path>> {
    paths.iter().map(|p| Some(p.as_ref())).collect()
}

/// Runs the tree to exhaustion. `admit(high, low)` filters which children
/// are created.
fn expand(
    planner: &SpaceTimePlanner<'_>,
    reports: &ReportProfile,
    deadline: &Deadline,
    admit: impl Fn(usize, usize) -> bool,
) -> Result<PbsRange, Timeout> {
    let tree = Tree {
        planner,
        reports,
        none: ConstraintSet::new(),
    };
    let mut queue = VecDeque::from([tree.root()]);
    let mut generated = 1;
    let mut leaves = Vec::new();
    let mut orderings = Vec::new();
    while let Some(node) = queue.pop_front() {
        deadline.check()?;
        let Some(collision) = node.first_collision else {
            leaves.push(node.assignment(reports));
            orderings.push(node.ordering);
            continue;
        };
        let (i, j) = collision.agents();
        for (high, low) in [(j, i), (i, j)] {
            if !admit(high, low) {
                continue;
            }
            if let Some(child) = tree.child(&node, high, low, generated) {
                generated += 1;
                queue.push_back(child);
            }
        }
    }
    Ok(PbsRange {
        leaves,
        orderings,
        nodes_generated: generated,
    })
}

/// All leaves of the priority tree, in creation order.
pub fn exhaustive_pbs(world: &GridWorld, reports: &ReportProfile, deadline: &Deadline) -> Result<PbsRange, Timeout> {
    exhaustive_pbs_with(&SpaceTimePlanner::new(world), reports, deadline)
}

pub fn exhaustive_pbs_with(
    planner: &SpaceTimePlanner<'_>,
    reports: &ReportProfile,
    deadline: &Deadline,
) -> Result<PbsRange, Timeout> {
    expand(planner, reports, deadline, |_, _| true)
}

/// The single branch of the tree whose relations all agree with `order`
/// (highest priority first).
pub fn pbs_along_order(world: &GridWorld, reports: &ReportProfile, order: &[usize]) -> Assignment {
    let chain = PriorityOrdering::from_permutation(order);
    let planner = SpaceTimePlanner::new(world);
    let mut range = expand(&planner, reports, &Deadline::unlimited(), |high, low| chain.dominates(high, low))
        .expect("no deadline");
    assert_eq!(range.leaves.len(), 1, "a chain admits exactly one branch");
    range.leaves.pop().expect("one leaf")
}
