//! Single-agent space-time search with garage waits and disappear-at-target.
//!
//! The planner minimises arrival time. Among all paths with the minimal
//! arrival it returns the one with the smallest garage delay and then the
//! lexicographically smallest move sequence in vertex-id order. It never
//! looks at cost rates or values, so every caller that plans through it gets
//! paths that are independent of what agents report.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use rustc_hash::{FxHashMap, FxHashSet};

use crate::grid::{GridWorld, Vertex};
use crate::instance::AgentType;
use crate::path::Path;

/// Forbidden `(vertex, timestep)` pairs and directed traversals
/// `(from, to, arrival timestep)` for one agent.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConstraintSet {
    vertex: FxHashSet<(Vertex, usize)>,
    edge: FxHashSet<(Vertex, Vertex, usize)>,
    latest: usize,
}

impl ConstraintSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forbid_vertex(&mut self, v: Vertex, t: usize) {
        self.vertex.insert((v, t));
        self.latest = self.latest.max(t);
    }

    pub fn forbid_edge(&mut self, from: Vertex, to: Vertex, t: usize) {
        self.edge.insert((from, to, t));
        self.latest = self.latest.max(t);
    }

    pub fn is_empty(&self) -> bool {
        self.vertex.is_empty() && self.edge.is_empty()
    }

    pub fn len(&self) -> usize {
        self.vertex.len() + self.edge.len()
    }

    /// Latest constrained timestep (0 when empty).
    pub fn latest(&self) -> usize {
        self.latest
    }

    #[inline]
    fn blocks_vertex(&self, v: Vertex, t: usize) -> bool {
        !self.vertex.is_empty() && self.vertex.contains(&(v, t))
    }

    #[inline]
    fn blocks_edge(&self, from: Vertex, to: Vertex, t: usize) -> bool {
        !self.edge.is_empty() && self.edge.contains(&(from, to, t))
    }

    /// Whether `path` respects every constraint.
    pub fn admits(&self, path: &Path) -> bool {
        (path.delay..=path.arrival()).all(|t| {
            let here = path.position_at(t).expect("within lifetime");
            if self.blocks_vertex(here, t) {
                return false;
            }
            match t.checked_sub(1).and_then(|s| path.position_at(s)) {
                Some(prev) if prev != here => !self.blocks_edge(prev, here, t),
                _ => true,
            }
        })
    }
}

const FREE: u32 = u32::MAX;

/// Space-time occupancy of a set of already planned paths.
///
/// Vertex occupancy is dense, indexed by `t * |V| + v`. For every occupied
/// slot the table also remembers where its occupant came from, which is all a
/// swap check needs; the rare second occupant of a slot (possible when the
/// reserved paths collide among themselves) goes to an overflow set.
#[derive(Clone, Debug)]
pub struct ReservationTable {
    num_vertices: usize,
    occupant: Vec<u32>,
    came_from: Vec<u32>,
    extra_vertex: FxHashSet<(Vertex, usize)>,
    // Reversed traversals: a reserved move a->b arriving t stores (b, a, t).
    extra_edge: FxHashSet<(Vertex, Vertex, usize)>,
    horizon: usize,
}

impl ReservationTable {
    pub fn new(world: &GridWorld) -> Self {
        ReservationTable {
            num_vertices: world.num_vertices(),
            occupant: Vec::new(),
            came_from: Vec::new(),
            extra_vertex: FxHashSet::default(),
            extra_edge: FxHashSet::default(),
            horizon: 0,
        }
    }

    pub fn from_paths<'a>(world: &GridWorld, paths: impl IntoIterator<Item = (usize, &'a Path)>) -> Self {
        let mut table = Self::new(world);
        for (agent, p) in paths {
            table.reserve(agent, p);
        }
        table
    }

    /// Latest reserved timestep.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn reserve(&mut self, agent: usize, path: &Path) {
        let end = path.arrival();
        let needed = (end + 1) * self.num_vertices;
        if self.occupant.len() < needed {
            self.occupant.resize(needed, FREE);
            self.came_from.resize(needed, FREE);
        }
        self.horizon = self.horizon.max(end);
        for t in path.delay..=end {
            let here = path.position_at(t).expect("within lifetime");
            let prev = t.checked_sub(1).and_then(|s| path.position_at(s));
            let slot = t * self.num_vertices + here.index();
            if self.occupant[slot] == FREE {
                self.occupant[slot] = agent as u32;
                self.came_from[slot] = prev.map_or(FREE, |p| p.0);
            } else {
                self.extra_vertex.insert((here, t));
                if let Some(p) = prev {
                    self.extra_edge.insert((here, p, t));
                }
            }
        }
    }

    /// Agent occupying `v` at `t`, if any (the first one reserved).
    pub fn occupant(&self, v: Vertex, t: usize) -> Option<usize> {
        let slot = t * self.num_vertices + v.index();
        match self.occupant.get(slot) {
            Some(&a) if a != FREE => Some(a as usize),
            _ => None,
        }
    }

    #[inline]
    fn vertex_taken(&self, v: Vertex, t: usize) -> bool {
        let slot = t * self.num_vertices + v.index();
        matches!(self.occupant.get(slot), Some(&a) if a != FREE)
    }

    /// Whether moving `from -> to` arriving at `t` swaps with a reserved agent.
    #[inline]
    fn swap_taken(&self, from: Vertex, to: Vertex, t: usize) -> bool {
        let slot = t * self.num_vertices + from.index();
        if matches!(self.came_from.get(slot), Some(&c) if c == to.0) {
            return true;
        }
        !self.extra_edge.is_empty() && self.extra_edge.contains(&(from, to, t))
    }
}

/// Per-goal distance tables, computed on first use and shared across plans.
pub struct SpaceTimePlanner<'w> {
    world: &'w GridWorld,
    tables: Vec<OnceLock<Vec<u32>>>,
}

#[derive(Copy, Clone, PartialEq, Eq)]
struct Open {
    f: usize,
    t: usize,
    node: u32,
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: smallest f first, deeper first on ties.
        other.f.cmp(&self.f).then(self.t.cmp(&other.t)).then(other.node.cmp(&self.node))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Query<'a> {
    world: &'a GridWorld,
    h: &'a [u32],
    start: Vertex,
    goal: Vertex,
    constraints: &'a ConstraintSet,
    reservations: &'a ReservationTable,
    limit: usize,
}

impl Query<'_> {
    #[inline]
    fn can_occupy(&self, v: Vertex, t: usize) -> bool {
        !self.reservations.vertex_taken(v, t) && !self.constraints.blocks_vertex(v, t)
    }

    #[inline]
    fn can_move(&self, from: Vertex, to: Vertex, t: usize) -> bool {
        if !self.can_occupy(to, t) {
            return false;
        }
        from == to || (!self.reservations.swap_taken(from, to, t) && !self.constraints.blocks_edge(from, to, t))
    }

    /// Earliest feasible arrival at the goal.
    fn earliest_arrival(&self) -> Option<usize> {
        let n = self.world.num_vertices() as u32;
        let garage = n;
        let hs = self.h[self.start.index()] as usize;
        let key = |node: u32, t: usize| t as u64 * (n as u64 + 1) + node as u64;
        let mut seen: FxHashSet<u64> = FxHashSet::default();
        let mut open = BinaryHeap::new();
        if self.can_occupy(self.start, 0) {
            open.push(Open {
                f: hs,
                t: 0,
                node: self.start.0,
            });
            seen.insert(key(self.start.0, 0));
        }
        open.push(Open {
            f: hs + 1,
            t: 0,
            node: garage,
        });
        seen.insert(key(garage, 0));

        while let Some(Open { t, node, .. }) = open.pop() {
            if node == self.goal.0 {
                return Some(t);
            }
            let nt = t + 1;
            if nt > self.limit {
                continue;
            }
            if node == garage {
                if self.can_occupy(self.start, nt) && seen.insert(key(self.start.0, nt)) {
                    open.push(Open {
                        f: nt + hs,
                        t: nt,
                        node: self.start.0,
                    });
                }
                if seen.insert(key(garage, nt)) {
                    open.push(Open {
                        f: nt + hs + 1,
                        t: nt,
                        node: garage,
                    });
                }
                continue;
            }
            let here = Vertex(node);
            for &next in self.world.successors(here) {
                let hn = self.h[next.index()];
                if hn == u32::MAX || nt + hn as usize > self.limit {
                    continue;
                }
                if self.can_move(here, next, nt) && seen.insert(key(next.0, nt)) {
                    open.push(Open {
                        f: nt + hn as usize,
                        t: nt,
                        node: next.0,
                    });
                }
            }
        }
        None
    }

    /// Lexicographically smallest move sequence from `(start, delay)` that
    /// arrives exactly at `arrival`, sharing the dead-state memo across delays.
    fn smallest_route(&self, delay: usize, arrival: usize, dead: &mut FxHashSet<(Vertex, usize)>) -> Option<Vec<Vertex>> {
        let viable = |v: Vertex, t: usize| -> bool {
            let h = self.h[v.index()];
            if h == u32::MAX || t + h as usize > arrival {
                return false;
            }
            // Reaching the goal early ends the path.
            if v == self.goal {
                return t == arrival;
            }
            t < arrival
        };
        if !self.can_occupy(self.start, delay) || !viable(self.start, delay) || dead.contains(&(self.start, delay)) {
            return None;
        }
        let mut route = vec![self.start];
        let mut cursor = vec![0usize];
        loop {
            let depth = route.len() - 1;
            let t = delay + depth;
            let here = route[depth];
            if t == arrival {
                debug_assert_eq!(here, self.goal);
                return Some(route);
            }
            let succ = self.world.successors(here);
            let k = cursor[depth];
            if k >= succ.len() {
                dead.insert((here, t));
                route.pop();
                cursor.pop();
                if route.is_empty() {
                    return None;
                }
                continue;
            }
            cursor[depth] = k + 1;
            let next = succ[k];
            if viable(next, t + 1) && !dead.contains(&(next, t + 1)) && self.can_move(here, next, t + 1) {
                route.push(next);
                cursor.push(0);
            }
        }
    }
}

impl<'w> SpaceTimePlanner<'w> {
    pub fn new(world: &'w GridWorld) -> Self {
        SpaceTimePlanner {
            world,
            tables: (0..world.num_vertices()).map(|_| OnceLock::new()).collect(),
        }
    }

    pub fn world(&self) -> &'w GridWorld {
        self.world
    }

    /// Exact distance-to-goal table.
    pub fn distances_to(&self, goal: Vertex) -> &[u32] {
        self.tables[goal.index()].get_or_init(|| self.world.distances_from(goal))
    }

    /// Earliest-arrival path for `agent` avoiding `reservations` and obeying
    /// `constraints`, or `None` if none exists within the search horizon
    /// `max(reservations.horizon(), horizon_hint) + |V|`.
    pub fn plan(
        &self,
        agent: &AgentType,
        constraints: &ConstraintSet,
        reservations: &ReservationTable,
        horizon_hint: usize,
    ) -> Option<Path> {
        let h = self.distances_to(agent.goal);
        if h[agent.start.index()] == u32::MAX {
            return None;
        }
        let query = Query {
            world: self.world,
            h,
            start: agent.start,
            goal: agent.goal,
            constraints,
            reservations,
            limit: reservations.horizon().max(horizon_hint) + self.world.num_vertices(),
        };
        let arrival = query.earliest_arrival()?;
        let mut dead = FxHashSet::default();
        let shortest = h[agent.start.index()] as usize;
        (0..=arrival - shortest)
            .find_map(|delay| query.smallest_route(delay, arrival, &mut dead).map(|moves| Path::new(delay, moves)))
            .or_else(|| unreachable!("arrival {arrival} was found feasible but no route reconstructs"))
    }
}

/// One-off plan without a shared distance cache.
pub fn plan(
    world: &GridWorld,
    agent: &AgentType,
    constraints: &ConstraintSet,
    reservations: &ReservationTable,
    horizon_hint: usize,
) -> Option<Path> {
    SpaceTimePlanner::new(world).plan(agent, constraints, reservations, horizon_hint)
}

/// Occupancy summary used by tests and diagnostics: `(vertex, t) -> agent`.
pub fn occupancy<P: AsRef<Path>>(paths: &[Option<P>]) -> FxHashMap<(Vertex, usize), Vec<usize>> {
    let mut out: FxHashMap<(Vertex, usize), Vec<usize>> = FxHashMap::default();
    for (i, p) in paths.iter().enumerate() {
        if let Some(p) = p {
            let p = p.as_ref();
            for t in p.delay..=p.arrival() {
                out.entry((p.position_at(t).expect("alive"), t)).or_default().push(i);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{load_map, Cell};

    fn v(w: &GridWorld, x: usize, y: usize) -> Vertex {
        w.vertex_at(Cell::new(x, y, 0)).unwrap()
    }

    fn agent(w: &GridWorld, s: (usize, usize), g: (usize, usize)) -> AgentType {
        AgentType::new(v(w, s.0, s.1), v(w, g.0, g.1), 0.1, 1.0)
    }

    #[test]
    fn unconstrained_is_isolated_shortest() {
        let w = load_map("type octile\nheight 3\nwidth 3\nmap\n...\n.@.\n...\n").unwrap();
        let a = agent(&w, (0, 1), (2, 1));
        let p = plan(&w, &a, &ConstraintSet::new(), &ReservationTable::new(&w), 0).unwrap();
        assert_eq!(p.delay, 0);
        assert_eq!(p.arrival(), 4);
        // Lexicographic tie-break: the upper detour has smaller vertex ids.
        assert_eq!(p.moves[1], v(&w, 0, 0));
    }

    #[test]
    fn cross_waits_one_step() {
        let w = GridWorld::open(3, 3);
        let a = agent(&w, (0, 1), (2, 1));
        let b = agent(&w, (1, 0), (1, 2));
        let pa = plan(&w, &a, &ConstraintSet::new(), &ReservationTable::new(&w), 0).unwrap();
        assert_eq!(pa.moves, vec![v(&w, 0, 1), v(&w, 1, 1), v(&w, 2, 1)]);
        let table = ReservationTable::from_paths(&w, [(0, &pa)]);
        let pb = plan(&w, &b, &ConstraintSet::new(), &table, 0).unwrap();
        assert_eq!(pb.arrival(), 3);
        assert_eq!(pb.delay, 0);
        assert_eq!(pb.moves, vec![v(&w, 1, 0), v(&w, 1, 0), v(&w, 1, 1), v(&w, 1, 2)]);
    }

    #[test]
    fn corridor_uses_garage_until_goal_frees() {
        let w = GridWorld::open(5, 1);
        let a = agent(&w, (0, 0), (4, 0));
        let b = agent(&w, (4, 0), (0, 0));
        let pa = plan(&w, &a, &ConstraintSet::new(), &ReservationTable::new(&w), 0).unwrap();
        assert_eq!(pa.arrival(), 4);
        let table = ReservationTable::from_paths(&w, [(0, &pa)]);
        let pb = plan(&w, &b, &ConstraintSet::new(), &table, 0).unwrap();
        assert_eq!(pb.delay, 5);
        assert_eq!(pb.arrival(), 9);
    }

    #[test]
    fn start_equals_goal() {
        let w = GridWorld::open(2, 2);
        let a = agent(&w, (1, 1), (1, 1));
        let p = plan(&w, &a, &ConstraintSet::new(), &ReservationTable::new(&w), 0).unwrap();
        assert_eq!(p.arrival(), 0);
        let mut c = ConstraintSet::new();
        c.forbid_vertex(a.start, 0);
        c.forbid_vertex(a.start, 1);
        let p = plan(&w, &a, &c, &ReservationTable::new(&w), c.latest()).unwrap();
        assert_eq!((p.delay, p.arrival()), (2, 2));
    }

    #[test]
    fn never_passes_through_goal_early() {
        // Goal at the corridor centre; blocking it at t=1 must not let the
        // agent step onto it and wait there.
        let w = GridWorld::open(3, 1);
        let a = agent(&w, (0, 0), (1, 0));
        let mut c = ConstraintSet::new();
        c.forbid_vertex(a.goal, 1);
        let p = plan(&w, &a, &c, &ReservationTable::new(&w), c.latest()).unwrap();
        assert_eq!(p.arrival(), 2);
        assert_eq!(p.moves.iter().filter(|&&x| x == a.goal).count(), 1);
    }

    #[test]
    fn edge_constraints_are_directional() {
        let w = GridWorld::open(2, 1);
        let a = agent(&w, (0, 0), (1, 0));
        let mut c = ConstraintSet::new();
        c.forbid_edge(a.goal, a.start, 1);
        let p = plan(&w, &a, &c, &ReservationTable::new(&w), 1).unwrap();
        assert_eq!(p.arrival(), 1);
        c.forbid_edge(a.start, a.goal, 1);
        let p = plan(&w, &a, &c, &ReservationTable::new(&w), 1).unwrap();
        assert_eq!(p.arrival(), 2);
        assert!(c.admits(&p));
    }

    #[test]
    fn reservation_swap_blocked() {
        let w = GridWorld::open(3, 1);
        let other = Path::new(0, vec![v(&w, 1, 0), v(&w, 0, 0)]);
        let table = ReservationTable::from_paths(&w, [(7, &other)]);
        assert_eq!(table.occupant(v(&w, 0, 0), 1), Some(7));
        assert!(table.swap_taken(v(&w, 0, 0), v(&w, 1, 0), 1));
        assert!(!table.swap_taken(v(&w, 1, 0), v(&w, 0, 0), 1));
    }

    #[test]
    fn unreachable_goal() {
        let w = load_map("type octile\nheight 1\nwidth 3\nmap\n.@.\n").unwrap();
        let a = AgentType::new(Vertex(0), Vertex(1), 0.1, 1.0);
        assert!(plan(&w, &a, &ConstraintSet::new(), &ReservationTable::new(&w), 0).is_none());
    }
}
