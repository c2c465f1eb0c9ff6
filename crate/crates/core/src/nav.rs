//! Grid navigation: obstacle inflation, A* / weighted A* over 8-connected
//! moves, and obstacle-aware shortest-path distances.
//!
//! Straight steps cost one cell, diagonal steps sqrt(2), both scaled by the
//! resolution. Unknown cells are never traversable, and a diagonal move
//! requires both adjacent orthogonal cells to be traversable (no corner
//! cutting). Ties on f are broken toward larger g, then by row-major index,
//! so searches are fully deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::grid::{CellState, GridGeometry, GridIndex, OccupancyGrid};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Traversability mask derived from an occupancy grid.
#[derive(Debug, Clone)]
pub struct NavGrid {
    geometry: GridGeometry,
    traversable: Vec<bool>,
}

impl NavGrid {
    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn is_traversable(&self, idx: GridIndex) -> bool {
        self.geometry.contains(idx) && self.traversable[self.geometry.index_of(idx)]
    }

    pub fn set_traversable(&mut self, idx: GridIndex, value: bool) {
        let i = self.geometry.index_of(idx);
        self.traversable[i] = value;
    }

    pub fn traversable_count(&self) -> usize {
        self.traversable.iter().filter(|&&t| t).count()
    }
}

/// Ordered cells from start to goal plus the metric length. An empty cell
/// list signals planning failure.
#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub cells: Vec<GridIndex>,
    pub length: f64,
}

impl PathResult {
    pub fn empty() -> Self {
        PathResult { cells: Vec::new(), length: 0.0 }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// CSV cell list (row,col) for debugging.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col\n");
        for cell in &self.cells {
            out.push_str(&format!("{},{}\n", cell.row, cell.col));
        }
        out
    }
}

/// Derive traversability: a cell is blocked iff it is Unknown, Occupied, or
/// within `robot_radius` (center-to-center) of an Occupied cell.
pub fn inflate(grid: &OccupancyGrid, robot_radius: f64) -> NavGrid {
    let geom = grid.geometry();
    let mut traversable: Vec<bool> = grid
        .cells()
        .map(|idx| grid.classify(idx) == CellState::Free)
        .collect();

    if robot_radius > 0.0 {
        let reach = (robot_radius / geom.resolution).floor() as i64;
        let mut offsets = Vec::new();
        for dr in -reach..=reach {
            for dc in -reach..=reach {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let dist = geom.resolution * ((dr * dr + dc * dc) as f64).sqrt();
                if dist <= robot_radius {
                    offsets.push((dr, dc));
                }
            }
        }
        for idx in grid.cells() {
            if grid.classify(idx) != CellState::Occupied {
                continue;
            }
            for &(dr, dc) in &offsets {
                let r = idx.row as i64 + dr;
                let c = idx.col as i64 + dc;
                if r >= 0 && c >= 0 && (r as usize) < geom.height && (c as usize) < geom.width {
                    traversable[r as usize * geom.width + c as usize] = false;
                }
            }
        }
    }

    NavGrid { geometry: geom, traversable }
}

/// Octile distance in meters: admissible and consistent for 8-connected moves.
fn octile(a: GridIndex, b: GridIndex, resolution: f64) -> f64 {
    let dr = (a.row as f64 - b.row as f64).abs();
    let dc = (a.col as f64 - b.col as f64).abs();
    let (lo, hi) = if dr < dc { (dr, dc) } else { (dc, dr) };
    resolution * (hi - lo + SQRT_2 * lo)
}

fn chebyshev(a: GridIndex, b: GridIndex) -> usize {
    let dr = a.row.abs_diff(b.row);
    let dc = a.col.abs_diff(b.col);
    dr.max(dc)
}

/// Heap entry ordered for a max-heap so that popping yields min f, then max
/// g, then min row-major index.
#[derive(Debug, Clone, Copy)]
struct OpenNode {
    f: f64,
    g: f64,
    index: usize,
}

impl PartialEq for OpenNode {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for OpenNode {}
impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OpenNode {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

const NEIGHBOR_OFFSETS: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

/// A* over the nav grid. Returns a path whose final cell lies within
/// Chebyshev distance `tolerance` of `goal`; empty on failure. `epsilon` = 1
/// gives optimal paths, larger values weight the heuristic for speed at a
/// bounded cost in length.
pub fn astar(
    nav: &NavGrid,
    start: GridIndex,
    goal: GridIndex,
    epsilon: f64,
    tolerance: usize,
) -> PathResult {
    debug_assert!(epsilon >= 1.0);
    let geom = nav.geometry();
    if !geom.contains(start) || !geom.contains(goal) || !nav.is_traversable(start) {
        return PathResult::empty();
    }
    if chebyshev(start, goal) <= tolerance {
        return PathResult { cells: vec![start], length: 0.0 };
    }

    let n = geom.cell_count();
    let mut g_score = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let start_i = geom.index_of(start);
    g_score[start_i] = 0.0;
    open.push(OpenNode { f: epsilon * octile(start, goal, geom.resolution), g: 0.0, index: start_i });

    while let Some(node) = open.pop() {
        if closed[node.index] || node.g > g_score[node.index] {
            continue;
        }
        closed[node.index] = true;
        let current = GridIndex::new(node.index / geom.width, node.index % geom.width);
        if chebyshev(current, goal) <= tolerance {
            return reconstruct(geom, &parent, node.index, g_score[node.index]);
        }
        for (dr, dc) in NEIGHBOR_OFFSETS {
            let r = current.row as i64 + dr;
            let c = current.col as i64 + dc;
            if r < 0 || c < 0 || r as usize >= geom.height || c as usize >= geom.width {
                continue;
            }
            let neighbor = GridIndex::new(r as usize, c as usize);
            if !nav.is_traversable(neighbor) {
                continue;
            }
            let diagonal = dr != 0 && dc != 0;
            if diagonal {
                // physical robots cannot cut corners
                let side_a = GridIndex::new(current.row, neighbor.col);
                let side_b = GridIndex::new(neighbor.row, current.col);
                if !nav.is_traversable(side_a) || !nav.is_traversable(side_b) {
                    continue;
                }
            }
            let step = if diagonal { SQRT_2 } else { 1.0 } * geom.resolution;
            let tentative = g_score[node.index] + step;
            let ni = geom.index_of(neighbor);
            if tentative < g_score[ni] {
                g_score[ni] = tentative;
                parent[ni] = node.index;
                open.push(OpenNode {
                    f: tentative + epsilon * octile(neighbor, goal, geom.resolution),
                    g: tentative,
                    index: ni,
                });
            }
        }
    }
    PathResult::empty()
}

fn reconstruct(geom: GridGeometry, parent: &[usize], last: usize, length: f64) -> PathResult {
    let mut cells = Vec::new();
    let mut i = last;
    while i != usize::MAX {
        cells.push(GridIndex::new(i / geom.width, i % geom.width));
        i = parent[i];
    }
    cells.reverse();
    PathResult { cells, length }
}

/// Exact shortest-path distance between two cells, or None when unreachable.
pub fn shortest_path_distance(nav: &NavGrid, a: GridIndex, b: GridIndex) -> Option<f64> {
    let path = astar(nav, a, b, 1.0, 0);
    if path.is_empty() {
        None
    } else {
        Some(path.length)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridGeometry, OccupancyGrid};
    use crate::selftest::oracles::dijkstra_cost;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Grid where listed cells are occupied and the rest known-free.
    fn grid_with_obstacles(w: usize, h: usize, res: f64, obstacles: &[(usize, usize)]) -> OccupancyGrid {
        let mut grid = OccupancyGrid::new(GridGeometry::new(w, h, res));
        for idx in grid.cells().collect::<Vec<_>>() {
            grid.set_log_odds(idx, -5.0);
        }
        for &(r, c) in obstacles {
            grid.set_log_odds(GridIndex::new(r, c), 5.0);
        }
        grid
    }

    fn random_nav(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> NavGrid {
        let mut obstacles = Vec::new();
        for r in 0..h {
            for c in 0..w {
                if rng.random::<f64>() < density {
                    obstacles.push((r, c));
                }
            }
        }
        inflate(&grid_with_obstacles(w, h, 1.0, &obstacles), 0.0)
    }

    #[test]
    fn inflate_radius_zero_matches_free_cells() {
        let grid = grid_with_obstacles(5, 5, 1.0, &[(2, 2), (0, 4)]);
        let nav = inflate(&grid, 0.0);
        for idx in grid.cells() {
            assert_eq!(
                nav.is_traversable(idx),
                grid.classify(idx) == CellState::Free
            );
        }
    }

    #[test]
    fn inflate_one_cell_radius_blocks_orthogonal_neighbors_only() {
        let grid = grid_with_obstacles(5, 5, 1.0, &[(2, 2)]);
        let nav = inflate(&grid, 1.0);
        assert!(!nav.is_traversable(GridIndex::new(2, 2)));
        for idx in [(1, 2), (3, 2), (2, 1), (2, 3)] {
            assert!(!nav.is_traversable(GridIndex::new(idx.0, idx.1)), "{idx:?}");
        }
        for idx in [(1, 1), (1, 3), (3, 1), (3, 3)] {
            assert!(nav.is_traversable(GridIndex::new(idx.0, idx.1)), "{idx:?}");
        }
    }

    #[test]
    fn inflate_huge_radius_blocks_everything() {
        let grid = grid_with_obstacles(5, 5, 1.0, &[(0, 0)]);
        let nav = inflate(&grid, 100.0);
        assert_eq!(nav.traversable_count(), 0);
    }

    #[test]
    fn inflate_never_frees_blocked_cells() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut obstacles = Vec::new();
            for r in 0..10 {
                for c in 0..10 {
                    if rng.random::<f64>() < 0.2 {
                        obstacles.push((r, c));
                    }
                }
            }
            let grid = grid_with_obstacles(10, 10, 0.5, &obstacles);
            let base = inflate(&grid, 0.0);
            let inflated = inflate(&grid, 1.1);
            for idx in grid.cells() {
                if !base.is_traversable(idx) {
                    assert!(!inflated.is_traversable(idx));
                }
            }
        }
    }

    #[test]
    fn astar_degenerate_start_is_goal() {
        let nav = inflate(&grid_with_obstacles(3, 3, 1.0, &[]), 0.0);
        let p = astar(&nav, GridIndex::new(1, 1), GridIndex::new(1, 1), 1.0, 0);
        assert_eq!(p.cells, vec![GridIndex::new(1, 1)]);
        assert_eq!(p.length, 0.0);
    }

    #[test]
    fn astar_pure_diagonal_on_empty_grid() {
        let nav = inflate(&grid_with_obstacles(10, 10, 1.0, &[]), 0.0);
        let p = astar(&nav, GridIndex::new(0, 0), GridIndex::new(9, 9), 1.0, 0);
        assert!(!p.is_empty());
        assert!((p.length - 9.0 * SQRT_2).abs() < 1e-9);
        assert_eq!(p.cells.len(), 10);
    }

    #[test]
    fn astar_walled_goal_returns_empty() {
        let nav = inflate(
            &grid_with_obstacles(5, 5, 1.0, &[(1, 3), (1, 4), (2, 3), (3, 3), (3, 4)]),
            0.0,
        );
        let p = astar(&nav, GridIndex::new(0, 0), GridIndex::new(2, 4), 1.0, 0);
        assert!(p.is_empty());
    }

    #[test]
    fn astar_does_not_cut_corners() {
        // ..#
        // .#.
        // ...  diagonal from (0,1) to (1,2) must be rejected: both sides blocked
        let nav = inflate(&grid_with_obstacles(3, 3, 1.0, &[(0, 2), (1, 1)]), 0.0);
        let p = astar(&nav, GridIndex::new(0, 0), GridIndex::new(2, 2), 1.0, 0);
        assert!(!p.is_empty());
        for pair in p.cells.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            if a.row != b.row && a.col != b.col {
                assert!(nav.is_traversable(GridIndex::new(a.row, b.col)));
                assert!(nav.is_traversable(GridIndex::new(b.row, a.col)));
            }
        }
    }

    #[test]
    fn astar_matches_dijkstra_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut reachable_cases = 0;
        for _ in 0..100 {
            let nav = random_nav(&mut rng, 30, 30, 0.3);
            let start = GridIndex::new(rng.random_range(0..30), rng.random_range(0..30));
            let goal = GridIndex::new(rng.random_range(0..30), rng.random_range(0..30));
            if !nav.is_traversable(start) {
                continue;
            }
            let oracle = dijkstra_cost(&nav, start, goal);
            let path = astar(&nav, start, goal, 1.0, 0);
            match oracle {
                Some(cost) => {
                    assert!(!path.is_empty(), "oracle reachable but astar failed");
                    assert!(
                        (path.length - cost).abs() < 1e-9,
                        "astar {} vs dijkstra {}",
                        path.length,
                        cost
                    );
                    reachable_cases += 1;
                }
                None => assert!(path.is_empty(), "astar found a path the oracle cannot"),
            }
        }
        assert!(reachable_cases > 20, "fixture too sparse: {reachable_cases}");
    }

    #[test]
    fn weighted_astar_within_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..60 {
            let nav = random_nav(&mut rng, 25, 25, 0.25);
            let start = GridIndex::new(rng.random_range(0..25), rng.random_range(0..25));
            let goal = GridIndex::new(rng.random_range(0..25), rng.random_range(0..25));
            if !nav.is_traversable(start) {
                continue;
            }
            if let Some(cost) = dijkstra_cost(&nav, start, goal) {
                let path = astar(&nav, start, goal, 1.5, 0);
                assert!(!path.is_empty());
                assert!(
                    path.length <= 1.5 * cost + 1e-9,
                    "weighted {} vs 1.5 x {}",
                    path.length,
                    cost
                );
            }
        }
    }

    #[test]
    fn astar_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let nav = random_nav(&mut rng, 20, 20, 0.3);
        let start = GridIndex::new(0, 0);
        let goal = GridIndex::new(19, 19);
        let a = astar(&nav, start, goal, 1.0, 0);
        let b = astar(&nav, start, goal, 1.0, 0);
        assert_eq!(a, b);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn astar_paths_are_valid(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nav = random_nav(&mut rng, 15, 15, 0.3);
            let start = GridIndex::new(rng.random_range(0..15), rng.random_range(0..15));
            let goal = GridIndex::new(rng.random_range(0..15), rng.random_range(0..15));
            prop_assume!(nav.is_traversable(start));
            let tolerance = rng.random_range(0..2usize);
            let path = astar(&nav, start, goal, 1.0, tolerance);
            if !path.is_empty() {
                prop_assert_eq!(path.cells[0], start);
                let last = *path.cells.last().unwrap();
                prop_assert!(chebyshev(last, goal) <= tolerance);
                for pair in path.cells.windows(2) {
                    prop_assert!(chebyshev(pair[0], pair[1]) == 1);
                    prop_assert!(nav.is_traversable(pair[1]));
                }
            }
        }
    }

    #[test]
    fn path_csv_lists_cells() {
        let nav = inflate(&grid_with_obstacles(3, 3, 1.0, &[]), 0.0);
        let p = astar(&nav, GridIndex::new(0, 0), GridIndex::new(0, 2), 1.0, 0);
        assert_eq!(p.to_csv(), "row,col\n0,0\n0,1\n0,2\n");
    }

    #[test]
    fn shortest_distance_adjacent_cells() {
        let nav = inflate(&grid_with_obstacles(3, 3, 0.5, &[]), 0.0);
        let d = shortest_path_distance(&nav, GridIndex::new(0, 0), GridIndex::new(0, 1));
        assert_eq!(d, Some(0.5));
    }

    #[test]
    fn shortest_distance_across_wall_is_none() {
        let nav = inflate(
            &grid_with_obstacles(3, 3, 1.0, &[(0, 1), (1, 1), (2, 1)]),
            0.0,
        );
        assert_eq!(
            shortest_path_distance(&nav, GridIndex::new(1, 0), GridIndex::new(1, 2)),
            None
        );
    }

    #[test]
    fn shortest_distance_u_corridor() {
        // 5x5, wall bar forcing a U: from (0,0) down, across, and back up.
        // No corner cutting around the bar tip, so the hand-counted optimum is
        // (0,0) (1,1) (2,1) (3,1) (4,1) (4,2) (4,3) (3,3) (2,3) (1,3) (0,4):
        // 8 straight steps and 2 diagonals.
        let nav = inflate(
            &grid_with_obstacles(5, 5, 1.0, &[(0, 2), (1, 2), (2, 2), (3, 2)]),
            0.0,
        );
        let d = shortest_path_distance(&nav, GridIndex::new(0, 0), GridIndex::new(0, 4)).unwrap();
        let expected = 2.0 * SQRT_2 + 8.0;
        assert!((d - expected).abs() < 1e-9, "{d} vs {expected}");
        let oracle = dijkstra_cost(&nav, GridIndex::new(0, 0), GridIndex::new(0, 4)).unwrap();
        assert!((oracle - d).abs() < 1e-9);
    }
}
