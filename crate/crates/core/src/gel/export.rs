use super::{ContactPatch, TactileFrame};
use crate::{Error, Result};
use std::io::Write;
use std::path::Path;

/// Writes a binary 16-bit PGM with depth in micrometers.
pub fn write_pgm(frame: &TactileFrame, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(32 + 2 * frame.depths().len());
    write!(out, "P5\n{} {}\n65535\n", frame.width(), frame.height()).map_err(|e| Error::io(path, e))?;
    for &d in frame.depths() {
        let um = (d * 1000.0).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&um.to_be_bytes());
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn patch_csv_header() -> &'static str {
    "tick,area_px,edge_offset_mm,edge_angle_rad"
}

/// One patch row; edge columns are empty when no edge was found.
pub fn patch_csv_row(tick: u64, patch: &ContactPatch) -> String {
    match patch.edge {
        Some(e) => format!("{tick},{},{:.6},{:.6}", patch.area, e.offset_mm, e.angle),
        None => format!("{tick},{},,", patch.area),
    }
}
