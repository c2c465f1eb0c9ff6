//! World and map representations: the ground-truth obstacle grid, per-robot
//! log-odds occupancy grids, coordinate transforms, map merging, and the
//! exploration completion metric.
//!
//! Conventions: cell (row 0, col 0) has its corner at world (0, 0); col indexes
//! x, row indexes y. `world_to_grid` floors coordinates, `grid_to_world`
//! returns cell centers.

use crate::error::{Error, Result};

/// Log-odds saturation bounds. Clamping prevents overflow and keeps converged
/// cells revisable.
pub const LOG_ODDS_MIN: f64 = -10.0;
pub const LOG_ODDS_MAX: f64 = 10.0;

pub const DEFAULT_OCC_THRESHOLD: f64 = 0.65;
pub const DEFAULT_FREE_THRESHOLD: f64 = 0.35;

/// A cell address: `row` indexes y, `col` indexes x.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GridIndex {
    pub row: usize,
    pub col: usize,
}

impl GridIndex {
    pub fn new(row: usize, col: usize) -> Self {
        GridIndex { row, col }
    }
}

/// A planar pose in meters/radians; `theta` is normalized to [-pi, pi).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta: normalize_angle(theta) }
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Pose { x, y, theta: 0.0 }
    }

    pub fn distance(&self, other: &Pose) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wrap an angle into [-pi, pi).
pub fn normalize_angle(theta: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = theta % two_pi;
    if a < -std::f64::consts::PI {
        a += two_pi;
    } else if a >= std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// Shared grid shape: dimensions in cells plus meters-per-cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        assert!(width >= 1 && height >= 1 && resolution > 0.0);
        GridGeometry { width, height, resolution }
    }

    pub fn cell_count(&self) -> usize {
        self.width * self.height
    }

    pub fn contains(&self, idx: GridIndex) -> bool {
        idx.row < self.height && idx.col < self.width
    }

    pub fn index_of(&self, idx: GridIndex) -> usize {
        idx.row * self.width + idx.col
    }

    /// Cell containing the world point (x, y).
    pub fn world_to_grid(&self, pose: &Pose) -> Result<GridIndex> {
        if pose.x < 0.0 || pose.y < 0.0 {
            return Err(Error::OutOfBounds { x: pose.x, y: pose.y });
        }
        let col = (pose.x / self.resolution).floor() as usize;
        let row = (pose.y / self.resolution).floor() as usize;
        let idx = GridIndex::new(row, col);
        if !self.contains(idx) {
            return Err(Error::OutOfBounds { x: pose.x, y: pose.y });
        }
        Ok(idx)
    }

    /// Center of a cell, theta = 0.
    pub fn grid_to_world(&self, idx: GridIndex) -> Pose {
        Pose::xy(
            (idx.col as f64 + 0.5) * self.resolution,
            (idx.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Center-to-center distance between two cells, in meters.
    pub fn cell_distance(&self, a: GridIndex, b: GridIndex) -> f64 {
        let dr = a.row as f64 - b.row as f64;
        let dc = a.col as f64 - b.col as f64;
        self.resolution * dr.hypot(dc)
    }

    /// Length of one cell diagonal, in meters.
    pub fn cell_diagonal(&self) -> f64 {
        self.resolution * std::f64::consts::SQRT_2
    }

    /// 8-connected in-bounds neighbors of a cell.
    pub fn neighbors8(&self, idx: GridIndex) -> impl Iterator<Item = GridIndex> + '_ {
        const OFFSETS: [(i64, i64); 8] = [
            (-1, -1),
            (-1, 0),
            (-1, 1),
            (0, -1),
            (0, 1),
            (1, -1),
            (1, 0),
            (1, 1),
        ];
        let (row, col) = (idx.row as i64, idx.col as i64);
        OFFSETS.iter().filter_map(move |&(dr, dc)| {
            let (r, c) = (row + dr, col + dc);
            if r >= 0 && c >= 0 && (r as usize) < self.height && (c as usize) < self.width {
                Some(GridIndex::new(r as usize, c as usize))
            } else {
                None
            }
        })
    }
}

/// Immutable boolean obstacle grid; used only by the sensor simulator, spawn
/// validation, and test fixtures. The boundary counts as occupied.
#[derive(Debug, Clone)]
pub struct GroundTruthWorld {
    geometry: GridGeometry,
    occupied: Vec<bool>,
}

impl GroundTruthWorld {
    pub fn new(geometry: GridGeometry, occupied: Vec<bool>) -> Self {
        assert_eq!(occupied.len(), geometry.cell_count());
        GroundTruthWorld { geometry, occupied }
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn is_occupied(&self, idx: GridIndex) -> bool {
        self.occupied[self.geometry.index_of(idx)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }
}

/// Parse a world file: a `resolution <float>` header line followed by a
/// rectangular grid of '#' (occupied) and '.' (free).
pub fn load_world(text: &str) -> Result<GroundTruthWorld> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::WorldFormat {
        line: 1,
        col: 1,
        msg: "empty world file".into(),
    })?;
    let resolution = parse_resolution_header(header)?;

    let mut rows: Vec<Vec<bool>> = Vec::new();
    let mut width = 0usize;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            // allow trailing blank lines only
            if rows.is_empty() {
                return Err(Error::WorldFormat {
                    line: line_no,
                    col: 1,
                    msg: "blank line before grid".into(),
                });
            }
            continue;
        }
        let mut row = Vec::with_capacity(line.len());
        for (j, ch) in line.chars().enumerate() {
            match ch {
                '#' => row.push(true),
                '.' => row.push(false),
                other => {
                    return Err(Error::WorldFormat {
                        line: line_no,
                        col: j + 1,
                        msg: format!("unknown character {other:?}"),
                    });
                }
            }
        }
        if rows.is_empty() {
            width = row.len();
        } else if row.len() != width {
            return Err(Error::WorldFormat {
                line: line_no,
                col: row.len().min(width) + 1,
                msg: format!("ragged row: expected {} cells, found {}", width, row.len()),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() || width == 0 {
        return Err(Error::WorldFormat {
            line: 2,
            col: 1,
            msg: "world grid is empty".into(),
        });
    }

    let geometry = GridGeometry::new(width, rows.len(), resolution);
    let occupied = rows.into_iter().flatten().collect();
    Ok(GroundTruthWorld::new(geometry, occupied))
}

fn parse_resolution_header(header: &str) -> Result<f64> {
    let mut parts = header.split_whitespace();
    let key = parts.next();
    let value = parts.next();
    if key != Some("resolution") {
        return Err(Error::WorldFormat {
            line: 1,
            col: 1,
            msg: "expected `resolution <float>` header".into(),
        });
    }
    let resolution: f64 = value
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::WorldFormat {
            line: 1,
            col: "resolution ".len() + 1,
            msg: "missing or invalid resolution value".into(),
        })?;
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::WorldFormat {
            line: 1,
            col: "resolution ".len() + 1,
            msg: format!("resolution must be positive, got {resolution}"),
        });
    }
    Ok(resolution)
}

/// Ternary classification of an occupancy cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellState {
    Occupied,
    Free,
    Unknown,
}

/// Per-cell log-odds belief over a discretized world.
///
/// Single-writer: updates take `&mut self`; values may be cloned and sent
/// across threads freely.
#[derive(Debug, Clone)]
pub struct OccupancyGrid {
    geometry: GridGeometry,
    log_odds: Vec<f64>,
    prior_log_odds: f64,
    occ_threshold: f64,
    free_threshold: f64,
}

impl OccupancyGrid {
    /// All-prior grid with default thresholds (occ 0.65, free 0.35, prior 0.5).
    pub fn new(geometry: GridGeometry) -> Self {
        Self::with_thresholds(geometry, 0.0, DEFAULT_OCC_THRESHOLD, DEFAULT_FREE_THRESHOLD)
    }

    pub fn with_thresholds(
        geometry: GridGeometry,
        prior_log_odds: f64,
        occ_threshold: f64,
        free_threshold: f64,
    ) -> Self {
        assert!(
            free_threshold < 0.5 && 0.5 < occ_threshold && occ_threshold < 1.0 && free_threshold > 0.0,
            "thresholds must satisfy 0 < free < 0.5 < occ < 1"
        );
        OccupancyGrid {
            log_odds: vec![prior_log_odds.clamp(LOG_ODDS_MIN, LOG_ODDS_MAX); geometry.cell_count()],
            geometry,
            prior_log_odds,
            occ_threshold,
            free_threshold,
        }
    }

    pub fn geometry(&self) -> GridGeometry {
        self.geometry
    }

    pub fn prior_log_odds(&self) -> f64 {
        self.prior_log_odds
    }

    pub fn log_odds(&self, idx: GridIndex) -> f64 {
        self.log_odds[self.geometry.index_of(idx)]
    }

    pub fn set_log_odds(&mut self, idx: GridIndex, value: f64) {
        let i = self.geometry.index_of(idx);
        self.log_odds[i] = value.clamp(LOG_ODDS_MIN, LOG_ODDS_MAX);
    }

    pub fn add_log_odds(&mut self, idx: GridIndex, delta: f64) {
        let i = self.geometry.index_of(idx);
        self.log_odds[i] = (self.log_odds[i] + delta).clamp(LOG_ODDS_MIN, LOG_ODDS_MAX);
    }

    /// Occupancy probability p = 1 - 1/(1 + exp(l)).
    pub fn probability(&self, idx: GridIndex) -> f64 {
        let l = self.log_odds(idx);
        1.0 - 1.0 / (1.0 + l.exp())
    }

    pub fn classify(&self, idx: GridIndex) -> CellState {
        let p = self.probability(idx);
        if p > self.occ_threshold {
            CellState::Occupied
        } else if p < self.free_threshold {
            CellState::Free
        } else {
            CellState::Unknown
        }
    }

    pub fn is_known(&self, idx: GridIndex) -> bool {
        self.classify(idx) != CellState::Unknown
    }

    pub fn known_cell_count(&self) -> usize {
        self.cells().filter(|&idx| self.is_known(idx)).count()
    }

    /// Row-major iterator over all cell indices.
    pub fn cells(&self) -> impl Iterator<Item = GridIndex> + '_ {
        let width = self.geometry.width;
        (0..self.geometry.cell_count()).map(move |i| GridIndex::new(i / width, i % width))
    }
}

/// Fuse grids sharing geometry and prior by summing per-cell deviations from
/// the prior. Deviations are summed in value order so every input permutation
/// yields bit-identical cells.
pub fn merge_maps(grids: &[&OccupancyGrid]) -> Result<OccupancyGrid> {
    let first = grids
        .first()
        .ok_or_else(|| Error::GeometryMismatch("merge of zero grids".into()))?;
    for g in &grids[1..] {
        if g.geometry != first.geometry {
            return Err(Error::GeometryMismatch(format!(
                "{}x{}@{} vs {}x{}@{}",
                g.geometry.width,
                g.geometry.height,
                g.geometry.resolution,
                first.geometry.width,
                first.geometry.height,
                first.geometry.resolution,
            )));
        }
        if g.prior_log_odds != first.prior_log_odds {
            return Err(Error::GeometryMismatch("prior mismatch".into()));
        }
    }

    let mut merged = OccupancyGrid::with_thresholds(
        first.geometry,
        first.prior_log_odds,
        first.occ_threshold,
        first.free_threshold,
    );
    let prior = first.prior_log_odds;
    let mut deviations = Vec::with_capacity(grids.len());
    for i in 0..first.geometry.cell_count() {
        deviations.clear();
        deviations.extend(grids.iter().map(|g| g.log_odds[i] - prior));
        deviations.sort_by(|a, b| a.total_cmp(b));
        let sum: f64 = deviations.iter().sum();
        merged.log_odds[i] = (prior + sum).clamp(LOG_ODDS_MIN, LOG_ODDS_MAX);
    }
    Ok(merged)
}

/// Percent of the reference map's known cells that are known in `partial`.
pub fn completion_percentage(partial: &OccupancyGrid, reference: &OccupancyGrid) -> Result<f64> {
    if partial.geometry != reference.geometry {
        return Err(Error::GeometryMismatch("completion metric".into()));
    }
    let known_ref = reference.known_cell_count();
    if known_ref == 0 {
        return Err(Error::EmptyReference);
    }
    let known_partial = partial.known_cell_count();
    Ok(100.0 * known_partial as f64 / known_ref as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom(w: usize, h: usize, res: f64) -> GridGeometry {
        GridGeometry::new(w, h, res)
    }

    #[test]
    fn load_empty_world() {
        let text = "resolution 0.5\n...\n...\n...\n";
        let w = load_world(text).unwrap();
        assert_eq!(w.geometry().width, 3);
        assert_eq!(w.geometry().height, 3);
        assert_eq!(w.geometry().resolution, 0.5);
        assert_eq!(w.occupied_count(), 0);
    }

    #[test]
    fn load_single_row() {
        let w = load_world("resolution 1.0\n#.#\n").unwrap();
        assert!(w.is_occupied(GridIndex::new(0, 0)));
        assert!(!w.is_occupied(GridIndex::new(0, 1)));
        assert!(w.is_occupied(GridIndex::new(0, 2)));
    }

    #[test]
    fn load_rejects_ragged_rows() {
        let err = load_world("resolution 1.0\n...\n..\n").unwrap_err();
        match err {
            Error::WorldFormat { line, .. } => assert_eq!(line, 3),
            other => panic!("expected WorldFormat, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_unknown_char() {
        let err = load_world("resolution 1.0\n.x.\n").unwrap_err();
        match err {
            Error::WorldFormat { line, col, .. } => {
                assert_eq!(line, 2);
                assert_eq!(col, 2);
            }
            other => panic!("expected WorldFormat, got {other:?}"),
        }
    }

    #[test]
    fn load_rejects_bad_header() {
        assert!(load_world("res 1.0\n...\n").is_err());
        assert!(load_world("resolution zero\n...\n").is_err());
        assert!(load_world("resolution -1\n...\n").is_err());
    }

    #[test]
    fn world_to_grid_cell_center() {
        let g = geom(4, 4, 1.0);
        let idx = g.world_to_grid(&Pose::xy(0.5, 0.5)).unwrap();
        assert_eq!(idx, GridIndex::new(0, 0));
    }

    #[test]
    fn world_to_grid_floors_coordinates() {
        let g = geom(4, 4, 0.5);
        let idx = g.world_to_grid(&Pose::xy(1.25, 0.75)).unwrap();
        assert_eq!(idx, GridIndex::new(1, 2));
    }

    #[test]
    fn world_to_grid_out_of_bounds() {
        let g = geom(4, 4, 1.0);
        assert!(g.world_to_grid(&Pose::xy(4.0, 1.0)).is_err());
        assert!(g.world_to_grid(&Pose::xy(-0.1, 1.0)).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn world_grid_round_trip_within_half_diagonal(
            x in 0.0..10.0f64,
            y in 0.0..8.0f64,
        ) {
            let g = geom(20, 16, 0.5);
            let p = Pose::xy(x.min(9.999), y.min(7.999));
            let idx = g.world_to_grid(&p).unwrap();
            let back = g.grid_to_world(idx);
            prop_assert!(p.distance(&back) <= g.cell_diagonal() / 2.0 + 1e-12);
        }

        #[test]
        fn classification_monotone_in_log_odds(l1 in -10.0..10.0f64, l2 in -10.0..10.0f64) {
            let g = geom(1, 1, 1.0);
            let mut grid = OccupancyGrid::new(g);
            let idx = GridIndex::new(0, 0);
            let (lo, hi) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
            grid.set_log_odds(idx, lo);
            let state_lo = grid.classify(idx);
            grid.set_log_odds(idx, hi);
            let state_hi = grid.classify(idx);
            let order = |s: CellState| match s {
                CellState::Free => 0,
                CellState::Unknown => 1,
                CellState::Occupied => 2,
            };
            prop_assert!(order(state_lo) <= order(state_hi));
        }
    }

    #[test]
    fn grid_world_round_trip_identity_on_every_cell() {
        let g = geom(20, 16, 0.5);
        for row in 0..16 {
            for col in 0..20 {
                let idx = GridIndex::new(row, col);
                assert_eq!(g.world_to_grid(&g.grid_to_world(idx)).unwrap(), idx);
            }
        }
    }

    #[test]
    fn merge_single_grid_is_identity() {
        let g = geom(3, 3, 1.0);
        let mut a = OccupancyGrid::new(g);
        a.set_log_odds(GridIndex::new(1, 1), 2.5);
        a.set_log_odds(GridIndex::new(0, 2), -1.25);
        let merged = merge_maps(&[&a]).unwrap();
        for idx in a.cells() {
            assert_eq!(merged.log_odds(idx), a.log_odds(idx));
        }
    }

    #[test]
    fn merge_priors_is_prior() {
        let g = geom(3, 3, 1.0);
        let a = OccupancyGrid::new(g);
        let b = OccupancyGrid::new(g);
        let merged = merge_maps(&[&a, &b]).unwrap();
        for idx in merged.cells() {
            assert_eq!(merged.log_odds(idx), 0.0);
        }
    }

    #[test]
    fn merge_disjoint_evidence_sums_known_counts() {
        let g = geom(4, 2, 1.0);
        let mut a = OccupancyGrid::new(g);
        let mut b = OccupancyGrid::new(g);
        // a knows the left half, b the right half
        for row in 0..2 {
            for col in 0..2 {
                a.set_log_odds(GridIndex::new(row, col), -4.0);
                b.set_log_odds(GridIndex::new(row, col + 2), 4.0);
            }
        }
        let merged = merge_maps(&[&a, &b]).unwrap();
        assert_eq!(a.known_cell_count(), 4);
        assert_eq!(b.known_cell_count(), 4);
        assert_eq!(merged.known_cell_count(), 8);
    }

    #[test]
    fn merge_rejects_geometry_mismatch() {
        let a = OccupancyGrid::new(geom(3, 3, 1.0));
        let b = OccupancyGrid::new(geom(3, 4, 1.0));
        assert!(merge_maps(&[&a, &b]).is_err());
    }

    proptest! {
        #[test]
        fn merge_order_invariant_for_three_grids(
            values in proptest::collection::vec(-2.0..2.0f64, 27),
        ) {
            let g = geom(3, 3, 1.0);
            let mut grids: Vec<OccupancyGrid> = Vec::new();
            for k in 0..3 {
                let mut grid = OccupancyGrid::new(g);
                for i in 0..9 {
                    grid.set_log_odds(GridIndex::new(i / 3, i % 3), values[k * 9 + i]);
                }
                grids.push(grid);
            }
            let orderings: [[usize; 3]; 6] =
                [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let base = merge_maps(&[&grids[0], &grids[1], &grids[2]]).unwrap();
            for ord in orderings {
                let m = merge_maps(&[&grids[ord[0]], &grids[ord[1]], &grids[ord[2]]]).unwrap();
                for idx in base.cells() {
                    prop_assert_eq!(m.log_odds(idx), base.log_odds(idx));
                }
            }
        }
    }

    #[test]
    fn completion_self_is_100() {
        let g = geom(4, 4, 1.0);
        let mut reference = OccupancyGrid::new(g);
        for i in 0..8 {
            reference.set_log_odds(GridIndex::new(i / 4, i % 4), -5.0);
        }
        let p = completion_percentage(&reference, &reference).unwrap();
        assert_eq!(p, 100.0);
    }

    #[test]
    fn completion_all_unknown_is_0() {
        let g = geom(4, 4, 1.0);
        let mut reference = OccupancyGrid::new(g);
        reference.set_log_odds(GridIndex::new(0, 0), 5.0);
        let partial = OccupancyGrid::new(g);
        assert_eq!(completion_percentage(&partial, &reference).unwrap(), 0.0);
    }

    #[test]
    fn completion_half_masked_is_50() {
        let g = geom(4, 4, 1.0);
        let mut reference = OccupancyGrid::new(g);
        let mut partial = OccupancyGrid::new(g);
        for i in 0..8 {
            let idx = GridIndex::new(i / 4, i % 4);
            reference.set_log_odds(idx, -5.0);
            if i < 4 {
                partial.set_log_odds(idx, -5.0);
            }
        }
        assert_eq!(completion_percentage(&partial, &reference).unwrap(), 50.0);
    }

    #[test]
    fn completion_rejects_empty_reference() {
        let g = geom(2, 2, 1.0);
        let reference = OccupancyGrid::new(g);
        let partial = OccupancyGrid::new(g);
        assert!(matches!(
            completion_percentage(&partial, &reference),
            Err(Error::EmptyReference)
        ));
    }

    proptest! {
        #[test]
        fn completion_monotone_as_cells_become_known(mask in 0u16..,) {
            let g = geom(4, 4, 1.0);
            let mut reference = OccupancyGrid::new(g);
            for idx in reference.cells().collect::<Vec<_>>() {
                reference.set_log_odds(idx, -5.0);
            }
            let mut partial = OccupancyGrid::new(g);
            let mut last = completion_percentage(&partial, &reference).unwrap();
            for bit in 0..16 {
                if mask & (1 << bit) != 0 {
                    partial.set_log_odds(GridIndex::new(bit / 4, bit % 4), -5.0);
                    let now = completion_percentage(&partial, &reference).unwrap();
                    prop_assert!(now >= last);
                    last = now;
                }
            }
        }
    }
}
