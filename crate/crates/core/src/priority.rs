//! Priority orderings and prioritized planning.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::assignment::{Assignment, AssignmentSource};
use crate::grid::GridWorld;
use crate::instance::ReportProfile;
use crate::planner::{ConstraintSet, ReservationTable, SpaceTimePlanner};
use crate::rng;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("adding {high} > {low} contradicts the ordering")]
pub struct OrderingConflict {
    pub high: usize,
    pub low: usize,
}

/// Strict partial order over agents, kept transitively closed.
/// `dominates(a, b)` means `a` has priority over `b`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PriorityOrdering {
    n: usize,
    matrix: Vec<bool>,
}

impl PriorityOrdering {
    pub fn empty(n: usize) -> Self {
        PriorityOrdering {
            n,
            matrix: vec![false; n * n],
        }
    }

    /// Total order from a permutation listing agents highest priority first.
    pub fn from_permutation(order: &[usize]) -> Self {
        let n = order.len();
        let mut o = Self::empty(n);
        for (k, &hi) in order.iter().enumerate() {
            for &lo in &order[k + 1..] {
                o.matrix[hi * n + lo] = true;
            }
        }
        o
    }

    pub fn num_agents(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dominates(&self, a: usize, b: usize) -> bool {
        self.matrix[a * self.n + b]
    }

    pub fn comparable(&self, a: usize, b: usize) -> bool {
        self.dominates(a, b) || self.dominates(b, a)
    }

    /// Adds `high > low` and everything transitivity then implies.
    pub fn insert(&mut self, high: usize, low: usize) -> Result<(), OrderingConflict> {
        if high == low || self.dominates(low, high) {
            return Err(OrderingConflict { high, low });
        }
        if self.dominates(high, low) {
            return Ok(());
        }
        let uppers: Vec<usize> = (0..self.n).filter(|&a| a == high || self.dominates(a, high)).collect();
        let lowers: Vec<usize> = (0..self.n).filter(|&b| b == low || self.dominates(low, b)).collect();
        for &a in &uppers {
            for &b in &lowers {
                self.matrix[a * self.n + b] = true;
            }
        }
        Ok(())
    }

    /// Agents with priority over `agent`.
    pub fn dominators(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&a| self.dominates(a, agent))
    }

    /// Agents `agent` has priority over.
    pub fn dominated(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&b| self.dominates(agent, b))
    }

    pub fn is_total(&self) -> bool {
        (0..self.n).all(|a| (a + 1..self.n).all(|b| self.comparable(a, b)))
    }

    /// Number of ordered pairs.
    pub fn relation_count(&self) -> usize {
        self.matrix.iter().filter(|&&x| x).count()
    }

    /// Topological order, smallest agent id first among the available ones.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut indegree: Vec<usize> = (0..self.n).map(|b| self.dominators(b).count()).collect();
        let mut done = vec![false; self.n];
        let mut out = Vec::with_capacity(self.n);
        // Closure: removing a minimal element lowers every dominated agent.
        while out.len() < self.n {
            let next = (0..self.n)
                .find(|&a| !done[a] && indegree[a] == 0)
                .expect("a strict partial order is acyclic");
            done[next] = true;
            out.push(next);
            for (b, deg) in indegree.iter_mut().enumerate() {
                if self.dominates(next, b) {
                    *deg -= 1;
                }
            }
        }
        out
    }

    /// Checks irreflexivity, antisymmetry and transitivity.
    pub fn is_strict_partial_order(&self) -> bool {
        let n = self.n;
        for a in 0..n {
            if self.dominates(a, a) {
                return false;
            }
            for b in 0..n {
                if self.dominates(a, b) && self.dominates(b, a) {
                    return false;
                }
                for c in 0..n {
                    if self.dominates(a, b) && self.dominates(b, c) && !self.dominates(a, c) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn assert_permutation(order: &[usize], n: usize) {
    let mut seen = vec![false; n];
    assert_eq!(order.len(), n, "ordering must list every agent");
    for &a in order {
        assert!(a < n && !seen[a], "ordering is not a permutation of 0..{n}");
        seen[a] = true;
    }
}

/// Prioritized planning over `order` (highest priority first). Every planned
/// path, including ones that earn zero welfare, reserves space for all
/// lower-priority agents.
pub fn prioritized_plan(world: &GridWorld, reports: &ReportProfile, order: &[usize], index: usize) -> Assignment {
    prioritized_plan_with(&SpaceTimePlanner::new(world), reports, order, index)
}

pub fn prioritized_plan_with(planner: &SpaceTimePlanner<'_>, reports: &ReportProfile, order: &[usize], index: usize) -> Assignment {
    let n = reports.len();
    assert_permutation(order, n);
    let none = ConstraintSet::new();
    let mut table = ReservationTable::new(planner.world());
    let mut paths = vec![None; n];
    for &agent in order {
        let path = planner
            .plan(reports.get(agent), &none, &table, 0)
            .unwrap_or_else(|| panic!("prioritized planning failed for agent {agent}: instance is not well-formed"));
        table.reserve(agent, &path);
        paths[agent] = Some(path);
    }
    Assignment::new(
        paths,
        reports,
        AssignmentSource::Ordering {
            index,
            order: order.to_vec(),
        },
    )
}

/// `m` independent uniform permutations of `0..n`; the `k`-th comes from the
/// `(seed, "orderings", k)` stream. Sampling is with replacement.
pub fn sample_orderings(n: usize, m: usize, seed: u64) -> Vec<Vec<usize>> {
    (0..m)
        .map(|k| {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng::stream(seed, "orderings", k as u64));
            perm
        })
        .collect()
}

/// All `n!` permutations in lexicographic order.
pub fn all_orderings(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        out.push(perm.clone());
        // next lexicographic permutation
        let Some(i) = (1..perm.len()).rev().find(|&i| perm[i - 1] < perm[i]) else {
            return out;
        };
        let j = (i..perm.len()).rev().find(|&j| perm[j] > perm[i - 1]).expect("pivot exists");
        perm.swap(i - 1, j);
        perm[i..].reverse();
    }
}
