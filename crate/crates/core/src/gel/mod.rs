//! Synthetic gel-pad tactile sensing.
//!
//! Pad coordinates: cell `(i, j)` has its center at
//! `x = (i + 0.5 - width_px / 2) / resolution`,
//! `y = (j + 0.5 - height_px / 2) / resolution` millimeters, so the pad
//! center is the origin and `j` grows with `y`.

mod export;
mod patch;
mod plant;
mod render;

pub use export::{patch_csv_header, patch_csv_row, write_pgm};
pub use patch::{extract_patch, ContactEdge, ContactPatch, DEFAULT_THRESHOLD};
pub use plant::{ContactPlant, PlantSpec};
pub use render::{render_card_face, render_edge_contact, render_sphere_contact, DigitBand};

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

/// Relief of the embossed digits above the card face, per side.
pub const DIGIT_EMBOSS_MM: f64 = 0.4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GelPadSpec {
    pub width_px: usize,
    pub height_px: usize,
    /// Pixels per millimeter.
    pub resolution: f64,
    /// Gel depth before saturation, mm.
    pub max_indent: f64,
    /// Additive area noise std-dev, pixels.
    pub noise_sigma: f64,
}

impl Default for GelPadSpec {
    fn default() -> Self {
        Self {
            width_px: 320,
            height_px: 240,
            resolution: 10.0,
            max_indent: 2.0,
            noise_sigma: 0.0,
        }
    }
}

impl GelPadSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Config("pad.width_px and pad.height_px must be positive".into()));
        }
        if !(self.resolution > 0.0) {
            return Err(Error::Config("pad.resolution must be positive".into()));
        }
        if !(self.max_indent > 0.0) {
            return Err(Error::Config("pad.max_indent must be positive".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::Config("pad.noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.width_px * self.height_px
    }

    pub fn half_width_mm(&self) -> f64 {
        self.width_px as f64 / (2.0 * self.resolution)
    }

    pub fn half_height_mm(&self) -> f64 {
        self.height_px as f64 / (2.0 * self.resolution)
    }

    /// Millimeter coordinates of the center of cell `(i, j)`.
    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            (i as f64 + 0.5 - self.width_px as f64 / 2.0) / self.resolution,
            (j as f64 + 0.5 - self.height_px as f64 / 2.0) / self.resolution,
        )
    }

    /// Pixel coordinates (fractional, cell-center convention) of a point in mm.
    pub fn to_px(&self, x: f64, y: f64) -> (f64, f64) {
        (
            x * self.resolution + self.width_px as f64 / 2.0 - 0.5,
            y * self.resolution + self.height_px as f64 / 2.0 - 0.5,
        )
    }
}

/// One depth image, row-major with `j` as the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct TactileFrame {
    pub pad: GelPadSpec,
    depth: Vec<f64>,
    /// Frame index at the sensor rate.
    pub tick: u64,
}

impl TactileFrame {
    pub fn zeros(pad: GelPadSpec) -> Self {
        Self {
            pad,
            depth: vec![0.0; pad.cells()],
            tick: 0,
        }
    }

    /// Builds a frame from raw depths, clamping into `[0, max_indent]`.
    pub fn from_depths(pad: GelPadSpec, depth: Vec<f64>) -> Result<Self> {
        if depth.len() != pad.cells() {
            return Err(Error::Contract(format!(
                "frame has {} cells, pad needs {}",
                depth.len(),
                pad.cells()
            )));
        }
        let depth = depth
            .into_iter()
            .map(|d| if d.is_nan() { 0.0 } else { d.clamp(0.0, pad.max_indent) })
            .collect();
        Ok(Self { pad, depth, tick: 0 })
    }

    pub fn with_tick(mut self, tick: u64) -> Self {
        self.tick = tick;
        self
    }

    pub fn width(&self) -> usize {
        self.pad.width_px
    }

    pub fn height(&self) -> usize {
        self.pad.height_px
    }

    pub fn depth(&self, i: usize, j: usize) -> f64 {
        self.depth[j * self.pad.width_px + i]
    }

    pub fn depths(&self) -> &[f64] {
        &self.depth
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, value: f64) {
        self.depth[j * self.pad.width_px + i] = value.clamp(0.0, self.pad.max_indent);
    }
}
