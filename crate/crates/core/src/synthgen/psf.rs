use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{SynthError, Trajectory, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsfEntry {
    pub x: u32,
    pub y: u32,
    pub weight: f64,
}

/// Sparse, unit-sum footprint of the object's center during one exposure.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PathPsf {
    pub frame_index: usize,
    /// Row-major order (by `y`, then `x`), strictly positive weights.
    pub entries: Vec<PsfEntry>,
}

impl PathPsf {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Total-variation distance `½ Σ |p - q|` over the union of supports.
    pub fn tv_distance(&self, other: &PathPsf) -> f64 {
        let mut diff: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for e in &self.entries {
            *diff.entry((e.y, e.x)).or_default() += e.weight;
        }
        for e in &other.entries {
            *diff.entry((e.y, e.x)).or_default() -= e.weight;
        }
        0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
    }
}

/// Bilinear weights of point `p` on the four pixel centers of the cell with
/// top-left center `(cx, cy)`, in the order (cx,cy), (cx+1,cy), (cx,cy+1), (cx+1,cy+1).
fn cell_weights(p: Vec2, cx: f64, cy: f64) -> [f64; 4] {
    let fx = p.x - cx;
    let fy = p.y - cy;
    [(1.0 - fx) * (1.0 - fy), fx * (1.0 - fy), (1.0 - fx) * fy, fx * fy]
}

fn push_crossings(a: f64, b: f64, out: &mut Vec<f64>) {
    let d = b - a;
    if d == 0.0 {
        return;
    }
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let mut k = lo.ceil();
    while k <= hi {
        let u = (k - a) / d;
        if u > 0.0 && u < 1.0 {
            out.push(u);
        }
        k += 1.0;
    }
}

/// Adds `scale · ∫₀¹ splat(a + u (b - a)) du` to `acc`.
///
/// The segment is cut wherever it crosses a pixel-center row or column, so each
/// piece stays in one cell where the bilinear weights are quadratic in `u` and
/// Simpson's rule integrates them exactly.
fn deposit_segment(a: Vec2, b: Vec2, scale: f64, acc: &mut BTreeMap<(i64, i64), f64>) {
    let mut cuts = vec![0.0, 1.0];
    push_crossings(a.x, b.x, &mut cuts);
    push_crossings(a.y, b.y, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();

    let d = b - a;
    for w in cuts.windows(2) {
        let (u0, u1) = (w[0], w[1]);
        if u1 <= u0 {
            continue;
        }
        let um = 0.5 * (u0 + u1);
        let pm = a + d * um;
        let (cx, cy) = (pm.x.floor(), pm.y.floor());
        let w0 = cell_weights(a + d * u0, cx, cy);
        let wm = cell_weights(pm, cx, cy);
        let w1 = cell_weights(a + d * u1, cx, cy);
        let h = (u1 - u0) / 6.0 * scale;
        let (ix, iy) = (cx as i64, cy as i64);
        let pixels = [(ix, iy), (ix + 1, iy), (ix, iy + 1), (ix + 1, iy + 1)];
        for (k, px) in pixels.into_iter().enumerate() {
            let v = h * (w0[k] + 4.0 * wm[k] + w1[k]);
            if v > 0.0 {
                *acc.entry((px.1, px.0)).or_default() += v;
            }
        }
    }
}

/// Path PSF of one frame on an `(height, width)` grid.
///
/// Every pair of consecutive visible samples deposits an anti-aliased segment
/// weighted by its time span; weight that lands outside the grid is dropped
/// before normalization. Frames with no visible in-bounds sample give an
/// empty PSF.
pub fn rasterize_psf(trajectory: &Trajectory, frame_index: usize, image_size: (u32, u32)) -> Result<PathPsf, SynthError> {
    let samples = trajectory.frames.get(frame_index).ok_or(SynthError::FrameOutOfRange {
        frame: frame_index,
        n_frames: trajectory.frames.len(),
    })?;
    let (height, width) = (i64::from(image_size.0), i64::from(image_size.1));

    let mut acc = BTreeMap::new();
    for pair in samples.windows(2) {
        if pair[0].visible && pair[1].visible {
            deposit_segment(pair[0].position, pair[1].position, trajectory.sample_dt, &mut acc);
        }
    }

    let in_bounds = |&(&(y, x), _): &(&(i64, i64), &f64)| x >= 0 && y >= 0 && x < width && y < height;
    let total: f64 = acc.iter().filter(in_bounds).map(|(_, w)| *w).sum();
    if !(total > 0.0) {
        return Ok(PathPsf { frame_index, entries: Vec::new() });
    }
    let entries = acc
        .iter()
        .filter(in_bounds)
        .map(|(&(y, x), &w)| PsfEntry { x: x as u32, y: y as u32, weight: w / total })
        .collect();
    Ok(PathPsf { frame_index, entries })
}
