//! Relay-constrained hierarchical frontier choice.
//!
//! Each robot in the hierarchy either consumes a pose imposed from above
//! (pass-down), picks the highest-ranked frontier that can be traced back to
//! the WiFi source through a chain of other frontier representatives within
//! radio range (primary), or falls back to a fireline along the shortest
//! obstacle-aware path to the source (backup). When nothing qualifies the
//! robot returns to its start pose with no dependencies.
//!
//! Radio reach is Euclidean and obstacle-blind; the backup bound deliberately
//! uses obstacle-aware path distance.

use crate::frontier::{frontier_pose, FrontierList};
use crate::grid::{GridIndex, Pose};
use crate::nav::{shortest_path_distance, NavGrid};

/// Hard cap on relay-path intermediates; graphs are small, this only guards
/// pathological enumerations.
pub const MAX_RELAY_HOPS: usize = 8;

/// Weights of the relay-path cost g = sum(w_r * rank + w_n) over relays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChoiceWeights {
    pub w_r: f64,
    pub w_n: f64,
}

impl Default for ChoiceWeights {
    fn default() -> Self {
        ChoiceWeights { w_r: 1.0, w_n: 1.0 }
    }
}

/// How a robot arrived at its chosen pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChoiceMode {
    PassDown,
    Primary,
    Backup,
    Default,
}

impl std::fmt::Display for ChoiceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ChoiceMode::PassDown => "PassDown",
            ChoiceMode::Primary => "Primary",
            ChoiceMode::Backup => "Backup",
            ChoiceMode::Default => "Default",
        };
        f.write_str(s)
    }
}

/// Relay poses imposed on lower-ranked robots, ordered from the chosen pose
/// toward the source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PassDownPath {
    pub poses: Vec<Pose>,
}

impl PassDownPath {
    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }
}

/// Outcome of one robot's choosing operation.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceResult {
    pub chosen: Pose,
    pub updated_frontiers: FrontierList,
    pub pass_down: PassDownPath,
    pub mode: ChoiceMode,
    /// g(f) of the winning relay path (Primary only).
    pub relay_cost: Option<f64>,
}

/// WiFi reachability graph over the source and all frontier representatives.
/// Node 0 is the source; node i + 1 is the frontier of rank i.
#[derive(Debug, Clone)]
pub struct RelayGraph {
    pub poses: Vec<Pose>,
    adjacency: Vec<Vec<usize>>,
}

pub const SOURCE_NODE: usize = 0;

impl RelayGraph {
    pub fn node_count(&self) -> usize {
        self.poses.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn frontier_node(rank: usize) -> usize {
        rank + 1
    }

    /// Rank of a frontier node; None for the source.
    pub fn rank_of_node(node: usize) -> Option<usize> {
        node.checked_sub(1)
    }
}

/// Edges connect poses whose Euclidean distance is at most `wifi_range`
/// (closed threshold); obstacles are ignored for radio.
pub fn build_relay_graph(
    frontiers: &FrontierList,
    geometry: crate::grid::GridGeometry,
    source: &Pose,
    wifi_range: f64,
) -> RelayGraph {
    let poses: Vec<Pose> = frontiers
        .frontiers
        .iter()
        .map(|f| frontier_pose(f, geometry))
        .collect();
    build_relay_graph_from_poses(&poses, source, wifi_range)
}

/// Build the relay graph from explicit representative poses (rank order).
pub fn build_relay_graph_from_poses(
    representative_poses: &[Pose],
    source: &Pose,
    wifi_range: f64,
) -> RelayGraph {
    let mut poses = Vec::with_capacity(representative_poses.len() + 1);
    poses.push(*source);
    poses.extend_from_slice(representative_poses);
    let n = poses.len();
    let mut adjacency = vec![Vec::new(); n];
    for a in 0..n {
        for b in (a + 1)..n {
            if poses[a].distance(&poses[b]) <= wifi_range {
                adjacency[a].push(b);
                adjacency[b].push(a);
            }
        }
    }
    RelayGraph { poses, adjacency }
}

/// All simple paths from `candidate` to the source whose intermediate count
/// stays within `max_hops` (capped at [`MAX_RELAY_HOPS`]). Paths are returned
/// as full node sequences `[candidate, relays.., source]` in deterministic
/// DFS order.
pub fn enumerate_relay_paths(
    graph: &RelayGraph,
    candidate: usize,
    max_hops: usize,
) -> Vec<Vec<usize>> {
    let cap = max_hops.min(MAX_RELAY_HOPS);
    let mut paths = Vec::new();
    let mut visited = vec![false; graph.node_count()];
    let mut stack = vec![candidate];
    visited[candidate] = true;
    dfs_paths(graph, cap, &mut visited, &mut stack, &mut paths);
    paths
}

fn dfs_paths(
    graph: &RelayGraph,
    cap: usize,
    visited: &mut [bool],
    stack: &mut Vec<usize>,
    paths: &mut Vec<Vec<usize>>,
) {
    let current = *stack.last().unwrap();
    for &next in graph.neighbors(current) {
        if next == SOURCE_NODE {
            let mut path = stack.clone();
            path.push(SOURCE_NODE);
            paths.push(path);
            continue;
        }
        if visited[next] {
            continue;
        }
        // intermediates so far = stack.len() - 1 (candidate excluded)
        if stack.len() > cap {
            continue;
        }
        visited[next] = true;
        stack.push(next);
        dfs_paths(graph, cap, visited, stack, paths);
        stack.pop();
        visited[next] = false;
    }
}

/// g(f): sum over intermediate relay nodes of w_r * rank + w_n. The zero-relay
/// path costs 0. Folds from +0.0 so an empty sum formats as "0", not "-0".
pub fn path_cost(path: &[usize], weights: &ChoiceWeights) -> f64 {
    debug_assert!(path.len() >= 2, "path runs candidate..source");
    path[1..path.len() - 1]
        .iter()
        .map(|&node| {
            let rank = RelayGraph::rank_of_node(node).expect("intermediates are frontier nodes");
            weights.w_r * rank as f64 + weights.w_n
        })
        .fold(0.0, |acc, term| acc + term)
}

/// Everything a choosing robot needs besides the frontier list and pass-down.
#[derive(Debug, Clone, Copy)]
pub struct ChoiceContext<'a> {
    pub source: Pose,
    pub source_cell: GridIndex,
    /// Robots strictly below the chooser in the hierarchy.
    pub robots_below: usize,
    pub wifi_range: f64,
    pub weights: ChoiceWeights,
    pub nav: &'a NavGrid,
    /// The chooser's start pose (the Default fallback target).
    pub start: Pose,
}

/// One robot's choosing operation. Order of precedence: inherited pass-down,
/// then the primary relay-path choice, then the backup fireline.
pub fn choose_frontier(
    frontiers: &FrontierList,
    pass_down_in: &PassDownPath,
    ctx: &ChoiceContext,
) -> ChoiceResult {
    let geom = ctx.nav.geometry();

    if let Some((first, rest)) = pass_down_in.poses.split_first() {
        let mut updated = frontiers.clone();
        if let Ok(cell) = geom.world_to_grid(first) {
            updated.remove_by_representative(cell);
        }
        return ChoiceResult {
            chosen: *first,
            updated_frontiers: updated,
            pass_down: PassDownPath { poses: rest.to_vec() },
            mode: ChoiceMode::PassDown,
            relay_cost: None,
        };
    }

    let representative_poses: Vec<Pose> = frontiers
        .frontiers
        .iter()
        .map(|f| frontier_pose(f, geom))
        .collect();
    let graph = build_relay_graph_from_poses(&representative_poses, &ctx.source, ctx.wifi_range);

    for (rank, &candidate_pose) in representative_poses.iter().enumerate() {
        let candidate = RelayGraph::frontier_node(rank);
        let paths = enumerate_relay_paths(&graph, candidate, ctx.robots_below);
        if paths.is_empty() {
            continue;
        }
        let best = select_best_path(&paths, &ctx.weights);
        let cost = path_cost(best, &ctx.weights);
        let relay_nodes = &best[1..best.len() - 1];

        let mut updated = frontiers.clone();
        let chosen_rep = frontiers.frontiers[rank].representative;
        updated.remove_by_representative(chosen_rep);
        let mut pass_down = Vec::with_capacity(relay_nodes.len());
        for &node in relay_nodes {
            let relay_rank = RelayGraph::rank_of_node(node).expect("relay is a frontier node");
            let rep = frontiers.frontiers[relay_rank].representative;
            pass_down.push(graph.poses[node]);
            updated.remove_by_representative(rep);
        }
        return ChoiceResult {
            chosen: candidate_pose,
            updated_frontiers: updated,
            pass_down: PassDownPath { poses: pass_down },
            mode: ChoiceMode::Primary,
            relay_cost: Some(cost),
        };
    }

    // fireline size counts the chooser itself
    backup_choice(frontiers, ctx.robots_below + 1, ctx)
}

/// Minimum-cost path; ties go to fewer relays, then the lexicographically
/// smaller rank sequence.
fn select_best_path<'a>(paths: &'a [Vec<usize>], weights: &ChoiceWeights) -> &'a Vec<usize> {
    paths
        .iter()
        .min_by(|a, b| {
            let ca = path_cost(a, weights);
            let cb = path_cost(b, weights);
            ca.total_cmp(&cb)
                .then_with(|| a.len().cmp(&b.len()))
                .then_with(|| a[1..a.len() - 1].cmp(&b[1..b.len() - 1]))
        })
        .expect("paths nonempty")
}

/// Fireline fallback: take the highest-ranked frontier whose obstacle-aware
/// path distance to the source is under `robots_remaining * wifi_range`, and
/// space relay poses evenly along that path. With nothing acceptable the
/// chosen pose defaults to the robot's start.
pub fn backup_choice(
    frontiers: &FrontierList,
    robots_remaining: usize,
    ctx: &ChoiceContext,
) -> ChoiceResult {
    let geom = ctx.nav.geometry();
    let bound = robots_remaining as f64 * ctx.wifi_range;

    for rank in 0..frontiers.len() {
        let frontier = &frontiers.frontiers[rank];
        let Some(distance) =
            shortest_path_distance(ctx.nav, frontier.representative, ctx.source_cell)
        else {
            continue;
        };
        if !(distance < bound) {
            continue;
        }
        let path = crate::nav::astar(ctx.nav, frontier.representative, ctx.source_cell, 1.0, 0);
        debug_assert!(!path.is_empty());

        let relay_count = if distance <= 0.0 {
            0
        } else {
            ((distance / ctx.wifi_range).ceil() as usize).saturating_sub(1)
        };
        let relays = place_relays(ctx.nav, &path.cells, distance, relay_count);

        let mut updated = frontiers.clone();
        updated.remove_by_representative(frontier.representative);
        return ChoiceResult {
            chosen: geom.grid_to_world(frontier.representative),
            updated_frontiers: updated,
            pass_down: PassDownPath { poses: relays },
            mode: ChoiceMode::Backup,
            relay_cost: None,
        };
    }

    ChoiceResult {
        chosen: ctx.start,
        updated_frontiers: frontiers.clone(),
        pass_down: PassDownPath::default(),
        mode: ChoiceMode::Default,
        relay_cost: None,
    }
}

/// Relay poses at arc lengths j * d / (k + 1) along the path (measured from
/// the chosen end), each snapped to the nearest traversable cell.
fn place_relays(
    nav: &NavGrid,
    path_cells: &[GridIndex],
    distance: f64,
    relay_count: usize,
) -> Vec<Pose> {
    if relay_count == 0 || path_cells.len() < 2 {
        return Vec::new();
    }
    let geom = nav.geometry();
    // cumulative arc length at each path cell center
    let mut arc = Vec::with_capacity(path_cells.len());
    arc.push(0.0);
    for pair in path_cells.windows(2) {
        let step = geom.cell_distance(pair[0], pair[1]);
        arc.push(arc.last().unwrap() + step);
    }
    let total = *arc.last().unwrap();

    (1..=relay_count)
        .map(|j| {
            let target = (j as f64 * distance / (relay_count + 1) as f64).min(total);
            let point = point_at_arc_length(geom, path_cells, &arc, target);
            snap_to_traversable(nav, point)
        })
        .collect()
}

fn point_at_arc_length(
    geom: crate::grid::GridGeometry,
    cells: &[GridIndex],
    arc: &[f64],
    target: f64,
) -> Pose {
    for i in 1..cells.len() {
        if arc[i] >= target {
            let seg = arc[i] - arc[i - 1];
            let frac = if seg > 0.0 { (target - arc[i - 1]) / seg } else { 0.0 };
            let a = geom.grid_to_world(cells[i - 1]);
            let b = geom.grid_to_world(cells[i]);
            return Pose::xy(a.x + frac * (b.x - a.x), a.y + frac * (b.y - a.y));
        }
    }
    geom.grid_to_world(*cells.last().unwrap())
}

/// Nearest traversable cell center (ties by row-major index).
fn snap_to_traversable(nav: &NavGrid, point: Pose) -> Pose {
    let geom = nav.geometry();
    let mut best: Option<(f64, GridIndex)> = None;
    for row in 0..geom.height {
        for col in 0..geom.width {
            let idx = GridIndex::new(row, col);
            if !nav.is_traversable(idx) {
                continue;
            }
            let d = geom.grid_to_world(idx).distance(&point);
            let better = match best {
                None => true,
                Some((bd, _)) => d < bd,
            };
            if better {
                best = Some((d, idx));
            }
        }
    }
    match best {
        Some((_, idx)) => geom.grid_to_world(idx),
        None => point,
    }
}
