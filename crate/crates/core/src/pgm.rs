//! 8-bit binary PGM (P5) serialization for occupancy grids.
//!
//! Cell values follow common map-server conventions: 0 = occupied,
//! 254 = free, 205 = unknown. The resolution rides in a header comment line
//! (`# resolution <f>`). Rows are written top to bottom starting at row 0.

use crate::error::{Error, Result};
use crate::grid::{CellState, GridGeometry, GridIndex, OccupancyGrid, LOG_ODDS_MAX, LOG_ODDS_MIN};

pub const PGM_OCCUPIED: u8 = 0;
pub const PGM_FREE: u8 = 254;
pub const PGM_UNKNOWN: u8 = 205;

/// Serialize a grid's cell classifications.
pub fn write_pgm(grid: &OccupancyGrid) -> Vec<u8> {
    let geom = grid.geometry();
    let pixels = grid.cells().map(|idx| match grid.classify(idx) {
        CellState::Occupied => PGM_OCCUPIED,
        CellState::Free => PGM_FREE,
        CellState::Unknown => PGM_UNKNOWN,
    });
    encode(geom, pixels.collect())
}

/// Serialize raw pixel values with the same header layout (used by renders).
pub fn encode(geom: GridGeometry, pixels: Vec<u8>) -> Vec<u8> {
    assert_eq!(pixels.len(), geom.cell_count());
    let mut out = Vec::with_capacity(pixels.len() + 64);
    out.extend_from_slice(
        format!(
            "P5\n# resolution {}\n{} {}\n255\n",
            geom.resolution, geom.width, geom.height
        )
        .as_bytes(),
    );
    out.extend_from_slice(&pixels);
    out
}

/// Decoded PGM payload: geometry plus raw pixels, row 0 first.
pub struct PgmImage {
    pub geometry: GridGeometry,
    pub pixels: Vec<u8>,
}

impl PgmImage {
    pub fn pixel(&self, idx: GridIndex) -> u8 {
        self.pixels[self.geometry.index_of(idx)]
    }
}

/// Parse a P5 file produced by [`write_pgm`] or [`encode`].
pub fn read_pgm(bytes: &[u8]) -> Result<PgmImage> {
    let mut cursor = 0usize;
    let magic = next_token(bytes, &mut cursor)?;
    if magic.0 != b"P5" {
        return Err(Error::Pgm("not a P5 file".into()));
    }
    let resolution = magic.1;

    let (w_tok, res1) = next_token(bytes, &mut cursor)?;
    let (h_tok, res2) = next_token(bytes, &mut cursor)?;
    let (max_tok, res3) = next_token(bytes, &mut cursor)?;
    let resolution = resolution.or(res1).or(res2).or(res3).ok_or_else(|| {
        Error::Pgm("missing `# resolution` header comment".into())
    })?;

    let width: usize = parse_ascii(w_tok)?;
    let height: usize = parse_ascii(h_tok)?;
    let maxval: usize = parse_ascii(max_tok)?;
    if maxval != 255 {
        return Err(Error::Pgm(format!("unsupported maxval {maxval}")));
    }
    // single whitespace byte separates header from raster
    cursor += 1;
    let expected = width * height;
    if bytes.len() < cursor + expected {
        return Err(Error::Pgm(format!(
            "truncated raster: expected {expected} bytes"
        )));
    }
    let pixels = bytes[cursor..cursor + expected].to_vec();
    Ok(PgmImage {
        geometry: GridGeometry::new(width, height, resolution),
        pixels,
    })
}

/// Rebuild an occupancy grid from a map PGM. Known cells come back saturated;
/// pixel values outside the map palette are rejected.
pub fn grid_from_pgm(bytes: &[u8]) -> Result<OccupancyGrid> {
    let image = read_pgm(bytes)?;
    let mut grid = OccupancyGrid::new(image.geometry);
    for (i, &px) in image.pixels.iter().enumerate() {
        let idx = GridIndex::new(i / image.geometry.width, i % image.geometry.width);
        match px {
            PGM_OCCUPIED => grid.set_log_odds(idx, LOG_ODDS_MAX),
            PGM_FREE => grid.set_log_odds(idx, LOG_ODDS_MIN),
            PGM_UNKNOWN => {}
            other => return Err(Error::Pgm(format!("unexpected pixel value {other}"))),
        }
    }
    Ok(grid)
}

/// Advance past whitespace and comments, returning the next token and any
/// resolution comment encountered on the way.
fn next_token<'a>(bytes: &'a [u8], cursor: &mut usize) -> Result<(&'a [u8], Option<f64>)> {
    let mut resolution = None;
    loop {
        while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if *cursor >= bytes.len() {
            return Err(Error::Pgm("unexpected end of header".into()));
        }
        if bytes[*cursor] == b'#' {
            let start = *cursor;
            while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                *cursor += 1;
            }
            let comment = std::str::from_utf8(&bytes[start..*cursor])
                .map_err(|_| Error::Pgm("non-utf8 comment".into()))?;
            if let Some(rest) = comment.strip_prefix("# resolution ") {
                resolution = rest.trim().parse::<f64>().ok();
            }
            continue;
        }
        let start = *cursor;
        while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        return Ok((&bytes[start..*cursor], resolution));
    }
}

fn parse_ascii(token: &[u8]) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Pgm("bad header token".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    #[test]
    fn round_trip_preserves_classification() {
        let geom = GridGeometry::new(4, 3, 0.5);
        let mut grid = OccupancyGrid::new(geom);
        grid.set_log_odds(GridIndex::new(0, 0), 5.0);
        grid.set_log_odds(GridIndex::new(2, 3), -5.0);
        let bytes = write_pgm(&grid);
        let back = grid_from_pgm(&bytes).unwrap();
        assert_eq!(back.geometry(), geom);
        for idx in grid.cells() {
            assert_eq!(back.classify(idx), grid.classify(idx));
        }
    }

    #[test]
    fn header_carries_resolution() {
        let geom = GridGeometry::new(2, 2, 0.25);
        let grid = OccupancyGrid::new(geom);
        let bytes = write_pgm(&grid);
        let text = String::from_utf8_lossy(&bytes[..32]);
        assert!(text.contains("# resolution 0.25"));
    }

    #[test]
    fn rejects_foreign_pixel_values() {
        let geom = GridGeometry::new(1, 1, 1.0);
        let bytes = encode(geom, vec![17]);
        assert!(grid_from_pgm(&bytes).is_err());
    }
}
