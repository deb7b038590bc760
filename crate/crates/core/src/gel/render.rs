use super::{GelPadSpec, TactileFrame, DIGIT_EMBOSS_MM};
use crate::{Error, Result};

/// Spherical indenter pressed `indent` mm into the pad center, in the
/// paraboloid approximation of the cap.
pub fn render_sphere_contact(pad: &GelPadSpec, radius: f64, indent: f64) -> Result<TactileFrame> {
    pad.validate()?;
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("sphere radius must be positive, got {radius}")));
    }
    let cap = radius.min(pad.max_indent);
    if !(0.0..=cap).contains(&indent) {
        return Err(Error::Domain(format!(
            "indent {indent} mm outside [0, {cap}] for radius {radius} mm"
        )));
    }
    let mut frame = TactileFrame::zeros(*pad);
    if indent == 0.0 {
        return Ok(frame);
    }
    for j in 0..pad.height_px {
        for i in 0..pad.width_px {
            let (x, y) = pad.cell_center(i, j);
            let d = indent - (x * x + y * y) / (2.0 * radius);
            if d > 0.0 {
                frame.set(i, j, d);
            }
        }
    }
    Ok(frame)
}

/// Largest `|offset|` for which the edge line at `angle` still meets the pad.
fn edge_reach(pad: &GelPadSpec, angle: f64) -> f64 {
    angle.sin().abs() * pad.half_width_mm() + angle.cos().abs() * pad.half_height_mm()
}

/// Flat contact bounded by a straight edge.
///
/// The edge has direction `(cos angle, sin angle)` and normal
/// `n = (-sin angle, cos angle)`; cells with `n . x < offset` are pressed to
/// `indent`. At `angle = 0` the edge is a row at `y = offset` with contact
/// below it.
pub fn render_edge_contact(pad: &GelPadSpec, offset: f64, angle: f64, indent: f64) -> Result<TactileFrame> {
    render_card_face(pad, offset, angle, indent, None)
}

/// Embossed digit block, in pad millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitBand {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Glyph pitch along x; each glyph fills `glyph_fill` of its pitch.
    pub pitch: f64,
    pub glyph_fill: f64,
}

impl DigitBand {
    pub fn solid(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Self {
        Self {
            x_min,
            x_max,
            y_min,
            y_max,
            pitch: 0.0,
            glyph_fill: 1.0,
        }
    }

    fn contains(&self, x: f64, y: f64) -> bool {
        if x < self.x_min || x > self.x_max || y < self.y_min || y > self.y_max {
            return false;
        }
        if self.pitch <= 0.0 {
            return true;
        }
        let phase = ((x - self.x_min) / self.pitch).fract();
        phase <= self.glyph_fill
    }
}

/// Edge contact with an optional embossed digit band on the pressed side.
pub fn render_card_face(
    pad: &GelPadSpec,
    offset: f64,
    angle: f64,
    indent: f64,
    digits: Option<&DigitBand>,
) -> Result<TactileFrame> {
    pad.validate()?;
    if !offset.is_finite() || !angle.is_finite() {
        return Err(Error::Domain("edge offset and angle must be finite".into()));
    }
    let reach = edge_reach(pad, angle);
    if offset.abs() > reach + 1e-9 {
        return Err(Error::Domain(format!(
            "edge offset {offset} mm beyond pad reach {reach} mm"
        )));
    }
    let relief = if digits.is_some() { DIGIT_EMBOSS_MM } else { 0.0 };
    if !(0.0..=pad.max_indent).contains(&indent) || indent + relief > pad.max_indent {
        return Err(Error::Domain(format!(
            "indent {indent} mm (+{relief} relief) outside [0, {}]",
            pad.max_indent
        )));
    }
    let (nx, ny) = (-angle.sin(), angle.cos());
    let mut frame = TactileFrame::zeros(*pad);
    if indent == 0.0 {
        return Ok(frame);
    }
    for j in 0..pad.height_px {
        for i in 0..pad.width_px {
            let (x, y) = pad.cell_center(i, j);
            if nx * x + ny * y < offset {
                let raised = digits.is_some_and(|band| band.contains(x, y));
                frame.set(i, j, if raised { indent + relief } else { indent });
            }
        }
    }
    Ok(frame)
}
