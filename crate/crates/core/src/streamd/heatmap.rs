use std::path::{Path, PathBuf};

use crate::dropnet::OutputGrid;
use crate::error::Result;
use crate::frame::write_pgm;

/// `⌊255·v + 0.5⌋`, clamped to the byte range.
pub fn quantize(v: f32) -> u8 {
    (255.0 * v as f64 + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Writes `{stem}_k0.pgm` and `{stem}_k1.pgm` (one `S×S` image per state
/// layer, row `j`, column `i`) into `dir`.
pub fn emit_heatmap(grid: &OutputGrid, dir: impl AsRef<Path>, stem: &str) -> Result<[PathBuf; 2]> {
    let s = grid.size();
    let dir = dir.as_ref();
    let paths = [0, 1].map(|k| dir.join(format!("{stem}_k{k}.pgm")));
    for (k, path) in paths.iter().enumerate() {
        let mut px = Vec::with_capacity(s * s);
        for j in 0..s {
            for i in 0..s {
                px.push(quantize(grid.get(i, j, k)));
            }
        }
        write_pgm(path, s, s, &px)?;
    }
    Ok(paths)
}
