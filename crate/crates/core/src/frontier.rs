//! Wavefront frontier extraction: a double breadth-first search over the
//! known-free region collects 8-connected components of frontier cells,
//! prunes components below a size threshold, and summarizes each component by
//! a representative cell (the spatial mean snapped onto the component).
//!
//! The returned list is ordered by component size descending; the rank of
//! entry i is i.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::grid::{CellState, GridGeometry, GridIndex, OccupancyGrid, Pose};

/// One 8-connected component of frontier cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Frontier {
    pub cells: Vec<GridIndex>,
    pub representative: GridIndex,
}

impl Frontier {
    pub fn size(&self) -> usize {
        self.cells.len()
    }
}

/// Rank-ordered frontiers: sizes non-increasing, ties by the representative's
/// row-major index. No cell appears in two frontiers.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrontierList {
    pub frontiers: Vec<Frontier>,
}

impl FrontierList {
    pub fn len(&self) -> usize {
        self.frontiers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frontiers.is_empty()
    }

    /// Rank of the frontier whose representative is `cell`, if present.
    pub fn rank_of(&self, cell: GridIndex) -> Option<usize> {
        self.frontiers.iter().position(|f| f.representative == cell)
    }

    /// Drop the frontier with this representative; remaining entries re-rank
    /// by position.
    pub fn remove_by_representative(&mut self, cell: GridIndex) -> Option<Frontier> {
        let pos = self.rank_of(cell)?;
        Some(self.frontiers.remove(pos))
    }
}

/// True iff the cell is known-free with at least one Unknown 8-neighbor.
pub fn is_frontier_cell(grid: &OccupancyGrid, idx: GridIndex) -> bool {
    if grid.classify(idx) != CellState::Free {
        return false;
    }
    grid.geometry()
        .neighbors8(idx)
        .any(|n| grid.classify(n) == CellState::Unknown)
}

// visit marks, one byte per cell
const MAP_OPEN: u8 = 1;
const MAP_CLOSED: u8 = 2;
const FRONTIER_OPEN: u8 = 4;
const FRONTIER_CLOSED: u8 = 8;

/// Extract all frontier components reachable from `robot_cell` through
/// known-free space. Components smaller than `min_frontier_size` are
/// discarded.
pub fn extract_frontiers(
    grid: &OccupancyGrid,
    robot_cell: GridIndex,
    min_frontier_size: usize,
) -> Result<FrontierList> {
    let geom = grid.geometry();
    if !geom.contains(robot_cell) || grid.classify(robot_cell) != CellState::Free {
        return Err(Error::NotFree { cell: robot_cell });
    }

    let mut marks = vec![0u8; geom.cell_count()];
    let mut components: Vec<Frontier> = Vec::new();

    let mut map_queue = VecDeque::new();
    map_queue.push_back(robot_cell);
    marks[geom.index_of(robot_cell)] |= MAP_OPEN;

    while let Some(current) = map_queue.pop_front() {
        let ci = geom.index_of(current);
        if marks[ci] & MAP_CLOSED != 0 {
            continue;
        }
        if is_frontier_cell(grid, current) && marks[ci] & FRONTIER_CLOSED == 0 {
            if let Some(frontier) = collect_component(grid, current, &mut marks, min_frontier_size)
            {
                components.push(frontier);
            }
        }
        for neighbor in geom.neighbors8(current) {
            let ni = geom.index_of(neighbor);
            if marks[ni] & (MAP_OPEN | MAP_CLOSED) != 0 {
                continue;
            }
            if grid.classify(neighbor) == CellState::Free {
                map_queue.push_back(neighbor);
                marks[ni] |= MAP_OPEN;
            }
        }
        marks[ci] |= MAP_CLOSED;
    }

    components.sort_by(|a, b| {
        b.size()
            .cmp(&a.size())
            .then_with(|| geom.index_of(a.representative).cmp(&geom.index_of(b.representative)))
    });
    Ok(FrontierList { frontiers: components })
}

/// Inner BFS: gather the 8-connected frontier component seeded at `seed`.
fn collect_component(
    grid: &OccupancyGrid,
    seed: GridIndex,
    marks: &mut [u8],
    min_frontier_size: usize,
) -> Option<Frontier> {
    let geom = grid.geometry();
    let mut cells = Vec::new();
    let mut queue = VecDeque::new();
    queue.push_back(seed);
    marks[geom.index_of(seed)] |= FRONTIER_OPEN;

    while let Some(current) = queue.pop_front() {
        let ci = geom.index_of(current);
        if marks[ci] & (MAP_CLOSED | FRONTIER_CLOSED) != 0 {
            continue;
        }
        if is_frontier_cell(grid, current) {
            cells.push(current);
            for neighbor in geom.neighbors8(current) {
                let ni = geom.index_of(neighbor);
                if marks[ni] & (FRONTIER_OPEN | FRONTIER_CLOSED | MAP_CLOSED) == 0 {
                    queue.push_back(neighbor);
                    marks[ni] |= FRONTIER_OPEN;
                }
            }
        }
        marks[ci] |= FRONTIER_CLOSED;
    }

    if cells.len() < min_frontier_size {
        return None;
    }
    let representative = snap_to_component(geom, &cells);
    Some(Frontier { cells, representative })
}

/// Arithmetic-mean cell snapped to the nearest component cell (ties by
/// row-major index).
fn snap_to_component(geom: GridGeometry, cells: &[GridIndex]) -> GridIndex {
    let n = cells.len() as f64;
    let mean_row = cells.iter().map(|c| c.row as f64).sum::<f64>() / n;
    let mean_col = cells.iter().map(|c| c.col as f64).sum::<f64>() / n;
    *cells
        .iter()
        .min_by(|a, b| {
            let da = (a.row as f64 - mean_row).powi(2) + (a.col as f64 - mean_col).powi(2);
            let db = (b.row as f64 - mean_row).powi(2) + (b.col as f64 - mean_col).powi(2);
            da.total_cmp(&db)
                .then_with(|| geom.index_of(**a).cmp(&geom.index_of(**b)))
        })
        .expect("component is nonempty")
}

/// World pose of the frontier's representative cell center.
pub fn frontier_pose(frontier: &Frontier, geometry: GridGeometry) -> Pose {
    geometry.grid_to_world(frontier.representative)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;
    use crate::selftest::oracles::naive_reachable_frontier_cells;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn known_free_grid(w: usize, h: usize) -> OccupancyGrid {
        let mut grid = OccupancyGrid::new(GridGeometry::new(w, h, 1.0));
        for idx in grid.cells().collect::<Vec<_>>() {
            grid.set_log_odds(idx, -5.0);
        }
        grid
    }

    #[test]
    fn predicate_interior_free_cell() {
        let grid = known_free_grid(3, 3);
        assert!(!is_frontier_cell(&grid, GridIndex::new(1, 1)));
    }

    #[test]
    fn predicate_free_cell_with_unknown_neighbor() {
        let mut grid = known_free_grid(3, 3);
        grid.set_log_odds(GridIndex::new(0, 0), 0.0);
        assert!(is_frontier_cell(&grid, GridIndex::new(1, 1)));
    }

    #[test]
    fn predicate_occupied_cell_is_never_frontier() {
        let mut grid = known_free_grid(3, 3);
        grid.set_log_odds(GridIndex::new(0, 0), 0.0);
        grid.set_log_odds(GridIndex::new(1, 1), 5.0);
        assert!(!is_frontier_cell(&grid, GridIndex::new(1, 1)));
    }

    #[test]
    fn fully_known_map_has_no_frontiers() {
        let grid = known_free_grid(6, 6);
        let list = extract_frontiers(&grid, GridIndex::new(2, 2), 1).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn known_block_in_unknown_map_yields_one_ring_frontier() {
        // 11x11 all unknown except a known-free 5x5 block centered at (5,5)
        let mut grid = OccupancyGrid::new(GridGeometry::new(11, 11, 1.0));
        for r in 3..=7 {
            for c in 3..=7 {
                grid.set_log_odds(GridIndex::new(r, c), -5.0);
            }
        }
        let list = extract_frontiers(&grid, GridIndex::new(5, 5), 1).unwrap();
        assert_eq!(list.len(), 1);
        let frontier = &list.frontiers[0];
        // the ring: block cells minus the 3x3 interior
        assert_eq!(frontier.size(), 16);
        let ring: BTreeSet<GridIndex> = frontier.cells.iter().copied().collect();
        for r in 3..=7 {
            for c in 3..=7 {
                let idx = GridIndex::new(r, c);
                let on_ring = r == 3 || r == 7 || c == 3 || c == 7;
                assert_eq!(ring.contains(&idx), on_ring, "{idx:?}");
            }
        }
        // mean is the block center; nearest ring cells tie at distance 2 and
        // row-major order picks (3,5)
        assert_eq!(frontier.representative, GridIndex::new(3, 5));
    }

    #[test]
    fn components_below_min_size_are_discarded() {
        // known-free 5x5 with two unknown pockets: one 1-cell, one 3-cell bar
        let mut grid = known_free_grid(9, 5);
        grid.set_log_odds(GridIndex::new(2, 1), 0.0);
        for c in 5..8 {
            grid.set_log_odds(GridIndex::new(2, c), 0.0);
        }
        let all = extract_frontiers(&grid, GridIndex::new(0, 0), 1).unwrap();
        assert_eq!(all.len(), 2);
        let pruned = extract_frontiers(&grid, GridIndex::new(0, 0), 9).unwrap();
        assert_eq!(pruned.len(), 1);
        assert!(pruned.frontiers[0].size() >= 9);
    }

    #[test]
    fn extraction_rejects_non_free_seed() {
        let grid = OccupancyGrid::new(GridGeometry::new(3, 3, 1.0));
        assert!(matches!(
            extract_frontiers(&grid, GridIndex::new(1, 1), 1),
            Err(Error::NotFree { .. })
        ));
    }

    #[test]
    fn sizes_are_non_increasing_and_cells_disjoint() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let (grid, seed) = random_partial_grid(&mut rng, 20, 20);
            let list = extract_frontiers(&grid, seed, 1).unwrap();
            let mut seen = BTreeSet::new();
            let mut last = usize::MAX;
            for f in &list.frontiers {
                assert!(f.size() <= last);
                last = f.size();
                assert!(f.cells.contains(&f.representative));
                for c in &f.cells {
                    assert!(seen.insert(*c), "cell {c:?} in two frontiers");
                    assert!(is_frontier_cell(&grid, *c));
                }
            }
        }
    }

    #[test]
    fn union_matches_naive_oracle_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..40 {
            let (grid, seed) = random_partial_grid(&mut rng, 25, 25);
            let list = extract_frontiers(&grid, seed, 1).unwrap();
            let got: BTreeSet<GridIndex> =
                list.frontiers.iter().flat_map(|f| f.cells.iter().copied()).collect();
            let expected = naive_reachable_frontier_cells(&grid, seed);
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let (grid, seed) = random_partial_grid(&mut rng, 20, 20);
        let a = extract_frontiers(&grid, seed, 2).unwrap();
        let b = extract_frontiers(&grid, seed, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pose_of_single_cell_frontier() {
        let geom = GridGeometry::new(8, 8, 1.0);
        let f = Frontier { cells: vec![GridIndex::new(2, 3)], representative: GridIndex::new(2, 3) };
        let p = frontier_pose(&f, geom);
        assert_eq!((p.x, p.y, p.theta), (3.5, 2.5, 0.0));
    }

    #[test]
    fn pose_of_straight_frontier_is_middle_cell() {
        let geom = GridGeometry::new(8, 8, 1.0);
        let cells: Vec<GridIndex> = (1..6).map(|c| GridIndex::new(4, c)).collect();
        let rep = snap_to_component(geom, &cells);
        assert_eq!(rep, GridIndex::new(4, 3));
    }

    #[test]
    fn l_shaped_frontier_snaps_to_component() {
        let geom = GridGeometry::new(8, 8, 1.0);
        let cells = vec![
            GridIndex::new(0, 0),
            GridIndex::new(1, 0),
            GridIndex::new(2, 0),
            GridIndex::new(2, 1),
            GridIndex::new(2, 2),
        ];
        // mean (1.4, 0.6) is off-component; (1,0) and (2,1) tie at d^2 = 0.52
        // and row-major picks (1,0)
        let rep = snap_to_component(geom, &cells);
        assert_eq!(rep, GridIndex::new(1, 0));
    }

    /// Random partially-observed grid with guaranteed free seed cell:
    /// scatter walls, then reveal a few random disks as known.
    pub(crate) fn random_partial_grid(
        rng: &mut ChaCha8Rng,
        w: usize,
        h: usize,
    ) -> (OccupancyGrid, GridIndex) {
        let mut grid = OccupancyGrid::new(GridGeometry::new(w, h, 1.0));
        let walls: Vec<bool> = (0..w * h).map(|_| rng.random::<f64>() < 0.2).collect();
        let disks = rng.random_range(2..6);
        for _ in 0..disks {
            let cr = rng.random_range(0..h) as f64;
            let cc = rng.random_range(0..w) as f64;
            let radius = rng.random_range(2.0..6.0);
            for r in 0..h {
                for c in 0..w {
                    let d = ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt();
                    if d <= radius {
                        let idx = GridIndex::new(r, c);
                        let l = if walls[r * w + c] { 5.0 } else { -5.0 };
                        grid.set_log_odds(idx, l);
                    }
                }
            }
        }
        // force a known-free seed
        let seed = GridIndex::new(rng.random_range(0..h), rng.random_range(0..w));
        grid.set_log_odds(seed, -5.0);
        (grid, seed)
    }
}
