//! Bundled oracle suites: independent reference implementations checked
//! against the production code paths. They ship in the library so the CLI can
//! gate releases on them, and the test suites reuse them.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coordination::{
    choose_frontier, ChoiceContext, ChoiceMode, ChoiceWeights, PassDownPath, RelayGraph,
    MAX_RELAY_HOPS, SOURCE_NODE,
};
use crate::frontier::{extract_frontiers, is_frontier_cell, Frontier, FrontierList};
use crate::grid::{CellState, GridGeometry, GridIndex, OccupancyGrid, Pose};
use crate::nav::{astar, inflate, NavGrid};

/// Reference implementations, deliberately written apart from the production
/// algorithms they check.
pub mod oracles {
    use super::*;

    /// Uniform-cost search with a linear scan-min frontier. Same movement
    /// rules as the planner (8-connected, no corner cutting, resolution-scaled
    /// costs), independent machinery.
    pub fn dijkstra_cost(nav: &NavGrid, start: GridIndex, goal: GridIndex) -> Option<f64> {
        let geom = nav.geometry();
        if !geom.contains(start) || !geom.contains(goal) || !nav.is_traversable(start) {
            return None;
        }
        if !nav.is_traversable(goal) && start != goal {
            return None;
        }
        let n = geom.cell_count();
        let mut dist = vec![f64::INFINITY; n];
        let mut done = vec![false; n];
        dist[geom.index_of(start)] = 0.0;

        loop {
            let mut best = usize::MAX;
            let mut best_d = f64::INFINITY;
            for i in 0..n {
                if !done[i] && dist[i] < best_d {
                    best = i;
                    best_d = dist[i];
                }
            }
            if best == usize::MAX {
                return None;
            }
            if best == geom.index_of(goal) {
                return Some(best_d);
            }
            done[best] = true;
            let row = best / geom.width;
            let col = best % geom.width;
            for dr in -1i64..=1 {
                for dc in -1i64..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let r = row as i64 + dr;
                    let c = col as i64 + dc;
                    if r < 0 || c < 0 || r as usize >= geom.height || c as usize >= geom.width {
                        continue;
                    }
                    let next = GridIndex::new(r as usize, c as usize);
                    if !nav.is_traversable(next) {
                        continue;
                    }
                    if dr != 0 && dc != 0 {
                        let side_a = GridIndex::new(row, next.col);
                        let side_b = GridIndex::new(next.row, col);
                        if !nav.is_traversable(side_a) || !nav.is_traversable(side_b) {
                            continue;
                        }
                    }
                    let step = if dr != 0 && dc != 0 {
                        std::f64::consts::SQRT_2
                    } else {
                        1.0
                    } * geom.resolution;
                    let ni = geom.index_of(next);
                    if best_d + step < dist[ni] {
                        dist[ni] = best_d + step;
                    }
                }
            }
        }
    }

    /// Full-scan frontier predicate intersected with the free cells reachable
    /// from `seed` (8-connected flood fill).
    pub fn naive_reachable_frontier_cells(
        grid: &OccupancyGrid,
        seed: GridIndex,
    ) -> BTreeSet<GridIndex> {
        let geom = grid.geometry();
        let mut reachable = vec![false; geom.cell_count()];
        let mut stack = vec![seed];
        reachable[geom.index_of(seed)] = true;
        while let Some(cell) = stack.pop() {
            for n in geom.neighbors8(cell) {
                let ni = geom.index_of(n);
                if !reachable[ni] && grid.classify(n) == CellState::Free {
                    reachable[ni] = true;
                    stack.push(n);
                }
            }
        }
        grid.cells()
            .filter(|&idx| reachable[geom.index_of(idx)] && is_frontier_cell(grid, idx))
            .collect()
    }

    /// Adjacency by raw pairwise distances.
    pub fn pairwise_distance_adjacency(poses: &[Pose], wifi_range: f64) -> Vec<Vec<bool>> {
        let n = poses.len();
        let mut adj = vec![vec![false; n]; n];
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    adj[a][b] = poses[a].distance(&poses[b]) <= wifi_range;
                }
            }
        }
        adj
    }

    /// Exhaustive simple-path enumeration: every permutation of every subset
    /// of intermediate nodes, filtered by edge validity. Paths are full node
    /// sequences `[candidate, .., source]`.
    pub fn all_simple_paths_brute(
        graph: &RelayGraph,
        candidate: usize,
        max_hops: usize,
    ) -> Vec<Vec<usize>> {
        let cap = max_hops.min(MAX_RELAY_HOPS);
        let intermediates: Vec<usize> = (1..graph.node_count())
            .filter(|&n| n != candidate)
            .collect();
        let mut result = Vec::new();
        let mut sequence = Vec::new();
        let mut used = vec![false; intermediates.len()];
        build_sequences(
            graph,
            candidate,
            cap,
            &intermediates,
            &mut used,
            &mut sequence,
            &mut result,
        );
        result
    }

    fn build_sequences(
        graph: &RelayGraph,
        candidate: usize,
        cap: usize,
        intermediates: &[usize],
        used: &mut [bool],
        sequence: &mut Vec<usize>,
        result: &mut Vec<Vec<usize>>,
    ) {
        if path_is_valid(graph, candidate, sequence) {
            let mut p = Vec::with_capacity(sequence.len() + 2);
            p.push(candidate);
            p.extend_from_slice(sequence);
            p.push(SOURCE_NODE);
            result.push(p);
        }
        if sequence.len() >= cap {
            return;
        }
        for i in 0..intermediates.len() {
            if used[i] {
                continue;
            }
            used[i] = true;
            sequence.push(intermediates[i]);
            build_sequences(graph, candidate, cap, intermediates, used, sequence, result);
            sequence.pop();
            used[i] = false;
        }
    }

    fn path_is_valid(graph: &RelayGraph, candidate: usize, sequence: &[usize]) -> bool {
        let mut prev = candidate;
        for &node in sequence {
            if !graph.has_edge(prev, node) {
                return false;
            }
            prev = node;
        }
        graph.has_edge(prev, SOURCE_NODE)
    }

    /// Minimum g(f) over all valid paths for `candidate`, computed from
    /// scratch. None when no path exists.
    pub fn brute_force_min_relay_cost(
        graph: &RelayGraph,
        candidate: usize,
        max_hops: usize,
        weights: &ChoiceWeights,
    ) -> Option<f64> {
        all_simple_paths_brute(graph, candidate, max_hops)
            .iter()
            .map(|path| {
                path[1..path.len() - 1]
                    .iter()
                    .map(|&node| weights.w_r * (node - 1) as f64 + weights.w_n)
                    .sum::<f64>()
            })
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Deliberate perturbations used to verify that the selftest harness catches
/// regressions; `None` everywhere outside the harness's own tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    None,
    /// Shift one extracted frontier cell by one column before comparing.
    FrontierOffByOne,
}

pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub failures: Vec<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub struct SelftestReport {
    pub suites: Vec<SuiteReport>,
}

impl SelftestReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.passed())
    }

    /// One line per suite plus a verdict, for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for s in &self.suites {
            out.push_str(&format!(
                "suite {}: {}/{} pass\n",
                s.name,
                s.cases - s.failures.len(),
                s.cases
            ));
        }
        out.push_str(if self.all_passed() { "selftest: PASS\n" } else { "selftest: FAIL\n" });
        out
    }
}

pub fn run_selftest(fault: Fault) -> SelftestReport {
    SelftestReport {
        suites: vec![planner_suite(), frontier_suite(fault), relay_suite()],
    }
}

fn open_grid(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> OccupancyGrid {
    let mut grid = OccupancyGrid::new(GridGeometry::new(w, h, 1.0));
    for idx in grid.cells().collect::<Vec<_>>() {
        let l = if rng.random::<f64>() < density { 5.0 } else { -5.0 };
        grid.set_log_odds(idx, l);
    }
    grid
}

fn planner_suite() -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5);
    let mut failures = Vec::new();
    let cases = 40;
    for case in 0..cases {
        let grid = open_grid(&mut rng, 30, 30, 0.3);
        let nav = inflate(&grid, 0.0);
        let start = GridIndex::new(rng.random_range(0..30), rng.random_range(0..30));
        let goal = GridIndex::new(rng.random_range(0..30), rng.random_range(0..30));
        if !nav.is_traversable(start) {
            continue;
        }
        let oracle = oracles::dijkstra_cost(&nav, start, goal);
        let exact = astar(&nav, start, goal, 1.0, 0);
        let weighted = astar(&nav, start, goal, 1.5, 0);
        match oracle {
            Some(cost) => {
                if exact.is_empty() || (exact.length - cost).abs() > 1e-9 {
                    failures.push(format!(
                        "planner case {case}: astar {} vs dijkstra {cost} ({start:?} -> {goal:?})",
                        exact.length
                    ));
                } else if weighted.is_empty() || weighted.length > 1.5 * cost + 1e-9 {
                    failures.push(format!(
                        "planner case {case}: weighted {} exceeds 1.5 x {cost}",
                        weighted.length
                    ));
                }
            }
            None => {
                if !exact.is_empty() {
                    failures.push(format!(
                        "planner case {case}: astar found a path the oracle cannot ({start:?} -> {goal:?})"
                    ));
                }
            }
        }
    }
    SuiteReport { name: "planner", cases, failures }
}

fn frontier_suite(fault: Fault) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF0);
    let mut failures = Vec::new();
    let cases = 60;
    for case in 0..cases {
        let (grid, seed) = random_partial_grid(&mut rng, 30, 30);
        let list = match extract_frontiers(&grid, seed, 1) {
            Ok(list) => list,
            Err(e) => {
                failures.push(format!("frontier case {case}: extraction error {e}"));
                continue;
            }
        };
        let mut union: BTreeSet<GridIndex> = list
            .frontiers
            .iter()
            .flat_map(|f| f.cells.iter().copied())
            .collect();
        if fault == Fault::FrontierOffByOne {
            if let Some(&cell) = union.iter().next() {
                union.remove(&cell);
                union.insert(GridIndex::new(cell.row, cell.col + 1));
            }
        }
        let expected = oracles::naive_reachable_frontier_cells(&grid, seed);
        if union != expected {
            failures.push(format!(
                "frontier case {case}: {} extracted vs {} expected cells (seed cell {seed:?})",
                union.len(),
                expected.len()
            ));
        }
    }
    SuiteReport { name: "frontier", cases, failures }
}

/// Partially observed random grid with a known-free seed.
pub fn random_partial_grid(rng: &mut ChaCha8Rng, w: usize, h: usize) -> (OccupancyGrid, GridIndex) {
    let mut grid = OccupancyGrid::new(GridGeometry::new(w, h, 1.0));
    let walls: Vec<bool> = (0..w * h).map(|_| rng.random::<f64>() < 0.2).collect();
    for _ in 0..rng.random_range(2..6) {
        let cr = rng.random_range(0..h) as f64;
        let cc = rng.random_range(0..w) as f64;
        let radius = rng.random_range(2.0..7.0);
        for r in 0..h {
            for c in 0..w {
                let d = ((r as f64 - cr).powi(2) + (c as f64 - cc).powi(2)).sqrt();
                if d <= radius {
                    let idx = GridIndex::new(r, c);
                    grid.set_log_odds(idx, if walls[r * w + c] { 5.0 } else { -5.0 });
                }
            }
        }
    }
    let seed = GridIndex::new(rng.random_range(0..h), rng.random_range(0..w));
    grid.set_log_odds(seed, -5.0);
    (grid, seed)
}

fn relay_suite() -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1E);
    let mut failures = Vec::new();
    let cases = 60;
    let geom = GridGeometry::new(20, 20, 1.0);
    let mut open = OccupancyGrid::new(geom);
    for idx in open.cells().collect::<Vec<_>>() {
        open.set_log_odds(idx, -5.0);
    }
    let nav = inflate(&open, 0.0);

    for case in 0..cases {
        let count = rng.random_range(1..8usize);
        let mut cells: Vec<GridIndex> = Vec::new();
        while cells.len() < count {
            let cell = GridIndex::new(rng.random_range(0..20), rng.random_range(0..20));
            if !cells.contains(&cell) {
                cells.push(cell);
            }
        }
        let frontiers = FrontierList {
            frontiers: cells
                .iter()
                .map(|&cell| Frontier { cells: vec![cell], representative: cell })
                .collect(),
        };
        let source_cell = GridIndex::new(rng.random_range(0..20), rng.random_range(0..20));
        let wifi_range = rng.random_range(2.0..9.0);
        let robots_below = rng.random_range(0..5usize);
        let weights = ChoiceWeights { w_r: rng.random_range(0.5..2.0), w_n: rng.random_range(0.5..2.0) };
        let ctx = ChoiceContext {
            source: geom.grid_to_world(source_cell),
            source_cell,
            robots_below,
            wifi_range,
            weights,
            nav: &nav,
            start: geom.grid_to_world(source_cell),
        };
        let result = choose_frontier(&frontiers, &PassDownPath::default(), &ctx);
        if result.mode != ChoiceMode::Primary {
            continue;
        }
        let poses: Vec<Pose> = cells.iter().map(|&c| geom.grid_to_world(c)).collect();
        let graph =
            crate::coordination::build_relay_graph_from_poses(&poses, &ctx.source, wifi_range);
        // the accepted candidate is the first rank with any valid path
        let accepted_rank = frontiers
            .frontiers
            .iter()
            .position(|f| geom.grid_to_world(f.representative) == result.chosen)
            .expect("chosen is a representative");
        for rank in 0..accepted_rank {
            if !oracles::all_simple_paths_brute(
                &graph,
                RelayGraph::frontier_node(rank),
                robots_below,
            )
            .is_empty()
            {
                failures.push(format!(
                    "relay case {case}: rank {rank} had a valid path but rank {accepted_rank} was accepted"
                ));
            }
        }
        let oracle_min = oracles::brute_force_min_relay_cost(
            &graph,
            RelayGraph::frontier_node(accepted_rank),
            robots_below,
            &weights,
        );
        match (result.relay_cost, oracle_min) {
            (Some(got), Some(want)) => {
                if (got - want).abs() > 1e-12 {
                    failures.push(format!(
                        "relay case {case}: selected cost {got} vs brute-force {want}"
                    ));
                }
            }
            other => failures.push(format!("relay case {case}: cost mismatch {other:?}")),
        }
    }
    SuiteReport { name: "relay", cases, failures }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fresh_selftest_passes() {
        let report = run_selftest(Fault::None);
        for suite in &report.suites {
            assert!(
                suite.passed(),
                "suite {} failed: {:?}",
                suite.name,
                suite.failures
            );
        }
        assert!(report.all_passed());
    }

    #[test]
    fn injected_frontier_fault_is_caught_and_named() {
        let report = run_selftest(Fault::FrontierOffByOne);
        assert!(!report.all_passed());
        let frontier_suite = report
            .suites
            .iter()
            .find(|s| s.name == "frontier")
            .unwrap();
        assert!(!frontier_suite.passed());
        assert!(report.summary().contains("suite frontier"));
        // other suites stay green
        for s in &report.suites {
            if s.name != "frontier" {
                assert!(s.passed(), "{} should pass", s.name);
            }
        }
    }
}
