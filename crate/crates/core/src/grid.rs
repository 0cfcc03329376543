//! Grid graphs loaded from MovingAI `.map` files, optionally stacked into
//! several identical layers.
//!
//! Cells are indexed row-major inside a layer and layer-major across layers:
//! `cell = layer * width * height + y * width + x`. Vertex ids are assigned to
//! passable cells in increasing cell order, so the vertex order is fixed by the
//! map alone. Everything downstream that breaks ties by vertex id depends on
//! this.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;

/// Dense id of a passable cell.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Vertex(pub u32);

impl Vertex {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Grid coordinates of a cell.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub layer: usize,
}

impl Cell {
    pub fn new(x: usize, y: usize, layer: usize) -> Self {
        Cell { x, y, layer }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.x, self.y, self.layer)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("line {line}: malformed header: {reason}")]
    Header { line: usize, reason: String },
    #[error("line {line}: expected {expected} map rows, found {found}")]
    RowCount {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: row has {found} cells, expected {expected}")]
    RowLength {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown map character {ch:?}")]
    UnknownChar { line: usize, ch: char },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Unit-cost traversable graph over grid cells.
///
/// 4-connected inside a layer; stacked layers add up/down edges between
/// cells with the same `(x, y)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridWorld {
    width: usize,
    height: usize,
    layers: usize,
    passable: Vec<bool>,
    vertex_of_cell: Vec<Option<Vertex>>,
    cell_of_vertex: Vec<usize>,
    neighbors: Vec<Vec<Vertex>>,
    // neighbors plus the vertex itself, ascending
    successors: Vec<Vec<Vertex>>,
}

impl GridWorld {
    /// Builds a single-layer world from a row-major passability mask.
    pub fn from_passable(width: usize, height: usize, passable: Vec<bool>) -> Result<Self, MapError> {
        if width == 0 || height == 0 {
            return Err(MapError::InvalidArgument("grid dimensions must be positive".into()));
        }
        if passable.len() != width * height {
            return Err(MapError::InvalidArgument(format!(
                "passability mask has {} cells, expected {}",
                passable.len(),
                width * height
            )));
        }
        Ok(Self::build(width, height, 1, passable))
    }

    /// Fully open single-layer grid.
    pub fn open(width: usize, height: usize) -> Self {
        Self::from_passable(width, height, vec![true; width * height]).expect("positive dimensions")
    }

    fn build(width: usize, height: usize, layers: usize, passable: Vec<bool>) -> Self {
        let mut vertex_of_cell = vec![None; passable.len()];
        let mut cell_of_vertex = Vec::new();
        for (cell, &open) in passable.iter().enumerate() {
            if open {
                vertex_of_cell[cell] = Some(Vertex(cell_of_vertex.len() as u32));
                cell_of_vertex.push(cell);
            }
        }
        let plane = width * height;
        let mut neighbors = Vec::with_capacity(cell_of_vertex.len());
        for &cell in &cell_of_vertex {
            let layer = cell / plane;
            let y = (cell % plane) / width;
            let x = cell % width;
            let mut adj = Vec::with_capacity(6);
            let mut push = |c: usize| {
                if let Some(v) = vertex_of_cell[c] {
                    adj.push(v);
                }
            };
            if layer > 0 {
                push(cell - plane);
            }
            if y > 0 {
                push(cell - width);
            }
            if x > 0 {
                push(cell - 1);
            }
            if x + 1 < width {
                push(cell + 1);
            }
            if y + 1 < height {
                push(cell + width);
            }
            if layer + 1 < layers {
                push(cell + plane);
            }
            adj.sort_unstable();
            neighbors.push(adj);
        }
        let successors = neighbors
            .iter()
            .enumerate()
            .map(|(v, adj)| {
                let mut s = adj.clone();
                s.push(Vertex(v as u32));
                s.sort_unstable();
                s
            })
            .collect();
        GridWorld {
            width,
            height,
            layers,
            passable,
            vertex_of_cell,
            cell_of_vertex,
            neighbors,
            successors,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn num_vertices(&self) -> usize {
        self.cell_of_vertex.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        (0..self.num_vertices() as u32).map(Vertex)
    }

    pub fn is_passable(&self, cell: Cell) -> bool {
        self.vertex_at(cell).is_some()
    }

    pub fn vertex_at(&self, cell: Cell) -> Option<Vertex> {
        if cell.x >= self.width || cell.y >= self.height || cell.layer >= self.layers {
            return None;
        }
        self.vertex_of_cell[self.cell_index(cell)]
    }

    pub fn cell_of(&self, v: Vertex) -> Cell {
        let cell = self.cell_of_vertex[v.index()];
        let plane = self.width * self.height;
        Cell {
            x: cell % self.width,
            y: (cell % plane) / self.width,
            layer: cell / plane,
        }
    }

    fn cell_index(&self, cell: Cell) -> usize {
        cell.layer * self.width * self.height + cell.y * self.width + cell.x
    }

    /// Adjacent vertices in ascending id order.
    pub fn neighbors(&self, v: Vertex) -> &[Vertex] {
        &self.neighbors[v.index()]
    }

    /// Vertices reachable in one timestep (neighbors and `v` itself), ascending.
    pub fn successors(&self, v: Vertex) -> &[Vertex] {
        &self.successors[v.index()]
    }

    /// Stacks a single-layer world into `layers` identical layers joined by
    /// vertical edges.
    pub fn stack(&self, layers: usize) -> Result<GridWorld, MapError> {
        if layers == 0 {
            return Err(MapError::InvalidArgument("layer count must be at least 1".into()));
        }
        if self.layers != 1 {
            return Err(MapError::InvalidArgument(format!(
                "can only stack a single-layer world, this one has {} layers",
                self.layers
            )));
        }
        let mut passable = Vec::with_capacity(self.passable.len() * layers);
        for _ in 0..layers {
            passable.extend_from_slice(&self.passable);
        }
        Ok(Self::build(self.width, self.height, layers, passable))
    }

    /// Breadth-first distances from `source` to every vertex, `u32::MAX` where
    /// unreachable.
    pub fn distances_from(&self, source: Vertex) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.num_vertices()];
        let mut queue = VecDeque::new();
        dist[source.index()] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.index()] + 1;
            for &w in self.neighbors(v) {
                if dist[w.index()] == u32::MAX {
                    dist[w.index()] = d;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Shortest path length in edges ignoring every other agent, or `None`
    /// when `goal` cannot be reached.
    pub fn isolated_distance(&self, start: Vertex, goal: Vertex) -> Option<u32> {
        if start == goal {
            return Some(0);
        }
        // Early-exit BFS; full tables come from `distances_from`.
        let mut dist = vec![u32::MAX; self.num_vertices()];
        let mut queue = VecDeque::new();
        dist[start.index()] = 0;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.index()] + 1;
            for &w in self.neighbors(v) {
                if dist[w.index()] == u32::MAX {
                    if w == goal {
                        return Some(d);
                    }
                    dist[w.index()] = d;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Writes layer 0 in MovingAI format (`.` passable, `@` blocked).
    pub fn to_map_text(&self) -> String {
        let mut out = format!("type octile\nheight {}\nwidth {}\nmap\n", self.height, self.width);
        for y in 0..self.height {
            for x in 0..self.width {
                out.push(if self.passable[y * self.width + x] { '.' } else { '@' });
            }
            out.push('\n');
        }
        out
    }
}

/// Parses MovingAI `.map` contents into a single-layer world.
pub fn load_map(text: &str) -> Result<GridWorld, MapError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));

    let mut next_header = |what: &str| -> Result<(usize, String), MapError> {
        for (line, content) in lines.by_ref() {
            if !content.trim().is_empty() {
                return Ok((line, content.trim().to_string()));
            }
        }
        Err(MapError::Header {
            line: text.lines().count() + 1,
            reason: format!("missing `{what}` line"),
        })
    };

    let (line, content) = next_header("type")?;
    if !content.starts_with("type") {
        return Err(MapError::Header {
            line,
            reason: format!("expected `type <name>`, found {content:?}"),
        });
    }

    let mut width = None;
    let mut height = None;
    for _ in 0..2 {
        let (line, content) = next_header("height/width")?;
        let mut parts = content.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let value = parts.next().and_then(|v| v.parse::<usize>().ok());
        let slot = match key {
            "height" => &mut height,
            "width" => &mut width,
            _ => {
                return Err(MapError::Header {
                    line,
                    reason: format!("expected `height <H>` or `width <W>`, found {content:?}"),
                })
            }
        };
        match value {
            Some(v) if v > 0 && parts.next().is_none() && slot.is_none() => *slot = Some(v),
            _ => {
                return Err(MapError::Header {
                    line,
                    reason: format!("bad dimension line {content:?}"),
                })
            }
        }
    }
    let (width, height) = match (width, height) {
        (Some(w), Some(h)) => (w, h),
        _ => {
            return Err(MapError::Header {
                line,
                reason: "both `height` and `width` are required".into(),
            })
        }
    };

    let (line, content) = next_header("map")?;
    if content != "map" {
        return Err(MapError::Header {
            line,
            reason: format!("expected `map`, found {content:?}"),
        });
    }

    let mut passable = Vec::with_capacity(width * height);
    let mut rows = 0;
    let mut last_line = line;
    for (line, content) in lines {
        last_line = line;
        if content.is_empty() {
            continue;
        }
        if rows == height {
            return Err(MapError::RowCount {
                line,
                expected: height,
                found: rows + 1,
            });
        }
        let found = content.chars().count();
        if found != width {
            return Err(MapError::RowLength {
                line,
                expected: width,
                found,
            });
        }
        for ch in content.chars() {
            passable.push(match ch {
                '.' | 'G' => true,
                '@' | 'O' | 'T' | 'S' | 'W' => false,
                other => return Err(MapError::UnknownChar { line, ch: other }),
            });
        }
        rows += 1;
    }
    if rows != height {
        return Err(MapError::RowCount {
            line: last_line,
            expected: height,
            found: rows,
        });
    }
    GridWorld::from_passable(width, height, passable)
}

/// Random single-layer grid with `blocked_fraction` of its cells blocked,
/// drawn from the `(seed, "grid", 0)` stream.
pub fn random_grid(width: usize, height: usize, blocked_fraction: f64, seed: u64) -> GridWorld {
    let mut rng = rng::stream(seed, "grid", 0);
    let passable = (0..width * height)
        .map(|_| rng.random::<f64>() >= blocked_fraction)
        .collect();
    GridWorld::from_passable(width, height, passable).expect("positive dimensions")
}
