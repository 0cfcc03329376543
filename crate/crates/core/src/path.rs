//! Timed paths, collisions between them, and per-agent welfare.
//!
//! An agent waits in her private garage for `delay` timesteps, appears on her
//! start vertex at timestep `delay`, follows `moves` one vertex per timestep
//! and vanishes right after reaching her goal. The goal is occupied at the
//! arrival timestep only.

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::grid::Vertex;
use crate::instance::AgentType;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub delay: usize,
    /// Starts at the agent's start vertex, ends at her goal; consecutive
    /// entries are adjacent or identical.
    pub moves: Vec<Vertex>,
}

impl AsRef<Path> for Path {
    fn as_ref(&self) -> &Path {
        self
    }
}

impl Path {
    pub fn new(delay: usize, moves: Vec<Vertex>) -> Self {
        assert!(!moves.is_empty(), "a path visits at least its start vertex");
        Path { delay, moves }
    }

    /// Timestep at which the agent reaches her goal; also `|π|`, the number of
    /// timesteps she is charged for, garage waits included.
    pub fn arrival(&self) -> usize {
        self.delay + self.moves.len() - 1
    }

    pub fn len(&self) -> usize {
        self.arrival()
    }

    pub fn is_empty(&self) -> bool {
        self.arrival() == 0
    }

    /// Occupied vertex at timestep `t`; `None` while in the garage or after
    /// arrival.
    #[inline]
    pub fn position_at(&self, t: usize) -> Option<Vertex> {
        t.checked_sub(self.delay).and_then(|k| self.moves.get(k).copied())
    }

    pub fn start(&self) -> Vertex {
        self.moves[0]
    }

    pub fn goal(&self) -> Vertex {
        *self.moves.last().expect("non-empty")
    }
}

/// `max(0, v - c|π|)`; zero for the empty path.
pub fn welfare(path: Option<&Path>, agent: &AgentType) -> f64 {
    match path {
        None => 0.0,
        Some(p) => (agent.value - agent.cost_rate * p.len() as f64).max(0.0),
    }
}

/// `v - c|π|` without the cap; zero for the empty path.
pub fn raw_welfare(path: Option<&Path>, agent: &AgentType) -> f64 {
    match path {
        None => 0.0,
        Some(p) => agent.value - agent.cost_rate * p.len() as f64,
    }
}

/// A collision between agents `a < b`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Conflict {
    /// Both occupy `vertex` at `time`.
    Vertex { a: usize, b: usize, vertex: Vertex, time: usize },
    /// `a` moves `from -> to` while `b` moves `to -> from`, arriving at `time`.
    Edge {
        a: usize,
        b: usize,
        from: Vertex,
        to: Vertex,
        time: usize,
    },
}

impl Conflict {
    pub fn agents(&self) -> (usize, usize) {
        match *self {
            Conflict::Vertex { a, b, .. } | Conflict::Edge { a, b, .. } => (a, b),
        }
    }

    pub fn time(&self) -> usize {
        match *self {
            Conflict::Vertex { time, .. } | Conflict::Edge { time, .. } => time,
        }
    }

    fn scan_key(&self) -> (usize, usize, usize) {
        let (a, b) = self.agents();
        (self.time(), a, b)
    }
}

fn conflicts_at<P: AsRef<Path>>(paths: &[Option<P>], t: usize, out: &mut Vec<Conflict>) {
    let mut at: FxHashMap<Vertex, Vec<usize>> = FxHashMap::default();
    let mut moves: FxHashMap<(Vertex, Vertex), Vec<usize>> = FxHashMap::default();
    for (i, p) in paths.iter().enumerate() {
        let Some(p) = p else { continue };
        let p = p.as_ref();
        let Some(here) = p.position_at(t) else { continue };
        at.entry(here).or_default().push(i);
        if let Some(prev) = t.checked_sub(1).and_then(|s| p.position_at(s)) {
            if prev != here {
                moves.entry((prev, here)).or_default().push(i);
            }
        }
    }
    for (&vertex, agents) in &at {
        for (k, &a) in agents.iter().enumerate() {
            for &b in &agents[k + 1..] {
                out.push(Conflict::Vertex { a, b, vertex, time: t });
            }
        }
    }
    for (&(from, to), agents) in &moves {
        if from > to {
            continue;
        }
        if let Some(back) = moves.get(&(to, from)) {
            for &i in agents {
                for &j in back {
                    let c = if i < j {
                        Conflict::Edge { a: i, b: j, from, to, time: t }
                    } else {
                        Conflict::Edge {
                            a: j,
                            b: i,
                            from: to,
                            to: from,
                            time: t,
                        }
                    };
                    out.push(c);
                }
            }
        }
    }
}

fn horizon<P: AsRef<Path>>(paths: &[Option<P>]) -> Option<usize> {
    paths.iter().flatten().map(|p| p.as_ref().arrival()).max()
}

/// First conflict in scan order: earliest timestep, then smallest `(a, b)`.
/// Empty paths and agents that already arrived never conflict.
pub fn find_first_conflict<P: AsRef<Path>>(paths: &[Option<P>]) -> Option<Conflict> {
    let end = horizon(paths)?;
    let mut found = Vec::new();
    for t in 0..=end {
        conflicts_at(paths, t, &mut found);
        if let Some(first) = found.iter().min_by_key(|c| c.scan_key()) {
            return Some(*first);
        }
    }
    None
}

/// Every conflict, sorted in scan order.
pub fn all_conflicts<P: AsRef<Path>>(paths: &[Option<P>]) -> Vec<Conflict> {
    let mut found = Vec::new();
    if let Some(end) = horizon(paths) {
        for t in 0..=end {
            conflicts_at(paths, t, &mut found);
        }
    }
    found.sort_by_key(|c| (c.scan_key(), *c));
    found
}

/// Whether two paths collide anywhere.
pub fn paths_collide(p: &Path, q: &Path) -> bool {
    let lo = p.delay.max(q.delay);
    let hi = p.arrival().min(q.arrival());
    for t in lo..=hi {
        if lo > hi {
            break;
        }
        let (a, b) = (p.position_at(t), q.position_at(t));
        if a == b {
            return true;
        }
        if t > lo {
            let (pa, pb) = (p.position_at(t - 1), q.position_at(t - 1));
            if pa == b && pb == a && a != pa {
                return true;
            }
        }
    }
    false
}
