use std::collections::VecDeque;

use mapf_mech::grid::{load_map, random_grid, GridWorld, Vertex};
use proptest::prelude::*;

fn bfs(world: &GridWorld, from: Vertex) -> Vec<Option<u32>> {
    let mut d = vec![None; world.num_vertices()];
    d[from.index()] = Some(0);
    let mut q = VecDeque::from([from]);
    while let Some(v) = q.pop_front() {
        for &u in world.neighbors(v) {
            if d[u.index()].is_none() {
                d[u.index()] = Some(d[v.index()].unwrap() + 1);
                q.push_back(u);
            }
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distances_are_a_metric(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        let world = random_grid(w, h, 0.25, seed);
        let tables: Vec<Vec<u32>> = world.vertices().map(|v| world.distances_from(v)).collect();
        for a in world.vertices() {
            let reference = bfs(&world, a);
            for b in world.vertices() {
                let d = tables[a.index()][b.index()];
                prop_assert_eq!(d, tables[b.index()][a.index()]);
                prop_assert_eq!(reference[b.index()].unwrap_or(u32::MAX), d);
                prop_assert_eq!(world.isolated_distance(a, b), reference[b.index()]);
                if d == u32::MAX {
                    continue;
                }
                for c in world.vertices() {
                    let (ac, cb) = (tables[a.index()][c.index()], tables[c.index()][b.index()]);
                    if ac != u32::MAX && cb != u32::MAX {
                        prop_assert!(d <= ac + cb);
                    }
                }
            }
        }
    }

    #[test]
    fn map_text_round_trips(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
        let world = random_grid(w, h, 0.3, seed);
        let back = load_map(&world.to_map_text()).unwrap();
        prop_assert_eq!(back, world);
    }

    #[test]
    fn neighbors_are_symmetric_and_adjacent(w in 1usize..9, h in 1usize..9, seed in any::<u64>()) {
        let world = random_grid(w, h, 0.25, seed);
        for v in world.vertices() {
            for &u in world.neighbors(v) {
                prop_assert!(world.neighbors(u).contains(&v));
                let (a, b) = (world.cell_of(v), world.cell_of(u));
                prop_assert_eq!(a.x.abs_diff(b.x) + a.y.abs_diff(b.y) + a.layer.abs_diff(b.layer), 1);
            }
        }
    }
}

#[test]
fn benchmark_map_matches_its_text() {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../maps/random-32-32-20.map")).unwrap();
    let grid_rows: Vec<&str> = text.lines().skip_while(|l| *l != "map").skip(1).collect();
    let passable = grid_rows.iter().flat_map(|r| r.chars()).filter(|&c| c == '.').count();
    let world = load_map(&text).unwrap();
    assert_eq!((world.width(), world.height()), (32, 32));
    assert_eq!(world.num_vertices(), passable);
    assert_eq!(passable, 819);
}
