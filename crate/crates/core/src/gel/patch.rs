use super::TactileFrame;
use crate::{Error, Result};
use std::collections::VecDeque;
use std::f64::consts::PI;

/// Default contact threshold on indentation, mm.
pub const DEFAULT_THRESHOLD: f64 = 0.05;

/// Dominant straight contact edge, same convention as
/// [`render_edge_contact`](super::render_edge_contact): contact lies on the
/// side `n . x < offset_mm` with `n = (-sin angle, cos angle)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactEdge {
    pub offset_mm: f64,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContactPatch {
    /// Cells at or above the threshold.
    pub area: usize,
    /// Mean pixel coordinate of the contact cells.
    pub centroid: Option<(f64, f64)>,
    /// Fitted to the boundary of the largest connected component. `None`
    /// when there is no contact or the component has no interior boundary.
    pub edge: Option<ContactEdge>,
}

impl ContactPatch {
    fn empty() -> Self {
        Self {
            area: 0,
            centroid: None,
            edge: None,
        }
    }
}

/// Threshold the depth image, then fit a line to the boundary of the
/// largest 4-connected contact component.
pub fn extract_patch(frame: &TactileFrame, threshold: f64) -> Result<ContactPatch> {
    if !(threshold > 0.0) {
        return Err(Error::Domain(format!("threshold must be positive, got {threshold}")));
    }
    let (w, h) = (frame.width(), frame.height());
    let mask: Vec<bool> = frame.depths().iter().map(|&d| d >= threshold).collect();
    let area = mask.iter().filter(|&&m| m).count();
    if area == 0 {
        return Ok(ContactPatch::empty());
    }

    let (mut sx, mut sy) = (0.0, 0.0);
    for (k, _) in mask.iter().enumerate().filter(|(_, &m)| m) {
        sx += (k % w) as f64;
        sy += (k / w) as f64;
    }
    let centroid = Some((sx / area as f64, sy / area as f64));

    let labels = label_components(&mask, w, h);
    let largest = largest_label(&labels.sizes);
    let edge = fit_boundary(frame, &labels.map, largest);

    Ok(ContactPatch { area, centroid, edge })
}

struct Labels {
    /// 0 = background, otherwise component id starting at 1.
    map: Vec<u32>,
    /// `sizes[id - 1]` is the cell count of component `id`.
    sizes: Vec<usize>,
}

fn label_components(mask: &[bool], w: usize, h: usize) -> Labels {
    let mut map = vec![0u32; mask.len()];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || map[start] != 0 {
            continue;
        }
        let id = sizes.len() as u32 + 1;
        let mut size = 0;
        map[start] = id;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            size += 1;
            let (i, j) = (k % w, k / w);
            let mut visit = |n: usize| {
                if mask[n] && map[n] == 0 {
                    map[n] = id;
                    queue.push_back(n);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < w {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - w);
            }
            if j + 1 < h {
                visit(k + w);
            }
        }
        sizes.push(size);
    }
    Labels { map, sizes }
}

fn largest_label(sizes: &[usize]) -> u32 {
    let mut best = 0;
    for (k, &s) in sizes.iter().enumerate() {
        if s > sizes[best] {
            best = k;
        }
    }
    best as u32 + 1
}

/// Total-least-squares line through the crack points of component `id`:
/// midpoints between each component cell and its in-grid neighbours outside
/// the component.
fn fit_boundary(frame: &TactileFrame, map: &[u32], id: u32) -> Option<ContactEdge> {
    let pad = &frame.pad;
    let (w, h) = (pad.width_px, pad.height_px);
    let mut cracks: Vec<(f64, f64)> = Vec::new();
    let (mut cx, mut cy, mut n_cells) = (0.0, 0.0, 0usize);
    for j in 0..h {
        for i in 0..w {
            let k = j * w + i;
            if map[k] != id {
                continue;
            }
            let (x, y) = pad.cell_center(i, j);
            cx += x;
            cy += y;
            n_cells += 1;
            let neighbours = [
                (i > 0).then(|| (i - 1, j)),
                (i + 1 < w).then(|| (i + 1, j)),
                (j > 0).then(|| (i, j - 1)),
                (j + 1 < h).then(|| (i, j + 1)),
            ];
            for (ni, nj) in neighbours.into_iter().flatten() {
                if map[nj * w + ni] != id {
                    let (ox, oy) = pad.cell_center(ni, nj);
                    cracks.push((0.5 * (x + ox), 0.5 * (y + oy)));
                }
            }
        }
    }
    if cracks.len() < 2 {
        return None;
    }
    let n = cracks.len() as f64;
    let mx = cracks.iter().map(|p| p.0).sum::<f64>() / n;
    let my = cracks.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in &cracks {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    let mut angle = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut offset = -angle.sin() * mx + angle.cos() * my;

    // Orient the normal away from the contact side.
    let (cx, cy) = (cx / n_cells as f64, cy / n_cells as f64);
    if -angle.sin() * cx + angle.cos() * cy > offset {
        angle += PI;
        offset = -offset;
    }
    if angle > PI {
        angle -= 2.0 * PI;
    } else if angle <= -PI {
        angle += 2.0 * PI;
    }
    Some(ContactEdge {
        offset_mm: offset,
        angle,
    })
}
