//! Static renders of a run: per-iteration grayscale PGM images combining the
//! merged map snapshot with frontier cells, representatives, relay chains,
//! robot poses, and the source marker.
//!
//! Reserved pixel values (also listed in the manual):
//! 0 occupied, 254 free, 205 unknown, 120 frontier cell, 150 relay-chain
//! segment, 60 frontier representative, 30 robot, 90 source.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridGeometry, GridIndex, Pose};
use crate::pgm::{self, PGM_FREE, PGM_UNKNOWN};
use crate::trace::{parse_trace, IterationSketch};

pub const PX_FRONTIER: u8 = 120;
pub const PX_CHAIN: u8 = 150;
pub const PX_REPRESENTATIVE: u8 = 60;
pub const PX_ROBOT: u8 = 30;
pub const PX_SOURCE: u8 = 90;

/// One rendered image.
pub struct RenderedFrame {
    pub iteration: usize,
    pub pgm: Vec<u8>,
}

/// Render every iteration of a trace file. Snapshot paths inside the trace
/// resolve relative to the trace file's directory.
pub fn render_trace_file(trace_path: &Path) -> Result<Vec<RenderedFrame>> {
    let text = std::fs::read_to_string(trace_path)
        .map_err(|e| Error::Trace(format!("cannot read {}: {e}", trace_path.display())))?;
    let parsed = parse_trace(&text)?;
    let base = trace_path.parent().unwrap_or(Path::new("."));

    let mut frames = Vec::new();
    for sketch in &parsed.iterations {
        let Some(snapshot) = &sketch.snapshot else {
            continue;
        };
        let bytes = std::fs::read(base.join(snapshot))
            .map_err(|e| Error::Trace(format!("cannot read snapshot {snapshot}: {e}")))?;
        let image = pgm::read_pgm(&bytes)?;
        let pgm = render_frame(image.geometry, &image.pixels, sketch, &parsed.source)?;
        frames.push(RenderedFrame { iteration: sketch.iteration, pgm });
    }
    if frames.is_empty() {
        return Err(Error::Trace(
            "trace contains no snapshots; rerun with rendering enabled".into(),
        ));
    }
    Ok(frames)
}

/// Compose one overlay image over base map pixels.
pub fn render_frame(
    geom: GridGeometry,
    base_pixels: &[u8],
    sketch: &IterationSketch,
    source: &Pose,
) -> Result<Vec<u8>> {
    let mut pixels = base_pixels.to_vec();

    // frontier cells from the base map itself: free next to unknown
    for row in 0..geom.height {
        for col in 0..geom.width {
            let idx = GridIndex::new(row, col);
            if base_pixels[geom.index_of(idx)] != PGM_FREE {
                continue;
            }
            let touches_unknown = geom
                .neighbors8(idx)
                .any(|n| base_pixels[geom.index_of(n)] == PGM_UNKNOWN);
            if touches_unknown {
                pixels[geom.index_of(idx)] = PX_FRONTIER;
            }
        }
    }

    // relay chains: segments goal -> relays -> source
    for chain in &sketch.chains {
        let mut nodes: Vec<GridIndex> = Vec::new();
        for pose in chain.iter().chain(std::iter::once(source)) {
            nodes.push(cell_of(geom, pose)?);
        }
        for pair in nodes.windows(2) {
            for cell in bresenham(pair[0], pair[1]) {
                pixels[geom.index_of(cell)] = PX_CHAIN;
            }
        }
    }

    for pose in &sketch.representatives {
        let cell = cell_of(geom, pose)?;
        pixels[geom.index_of(cell)] = PX_REPRESENTATIVE;
    }
    for pose in &sketch.robot_poses {
        let cell = cell_of(geom, pose)?;
        pixels[geom.index_of(cell)] = PX_ROBOT;
    }
    let source_cell = cell_of(geom, source)?;
    pixels[geom.index_of(source_cell)] = PX_SOURCE;

    Ok(pgm::encode(geom, pixels))
}

fn cell_of(geom: GridGeometry, pose: &Pose) -> Result<GridIndex> {
    geom.world_to_grid(pose)
        .map_err(|_| Error::Trace(format!("pose ({}, {}) outside the map", pose.x, pose.y)))
}

/// Integer line rasterization between two cells, endpoints included.
fn bresenham(a: GridIndex, b: GridIndex) -> Vec<GridIndex> {
    let (mut x0, mut y0) = (a.col as i64, a.row as i64);
    let (x1, y1) = (b.col as i64, b.row as i64);
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut cells = Vec::new();
    loop {
        cells.push(GridIndex::new(y0 as usize, x0 as usize));
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    cells
}
