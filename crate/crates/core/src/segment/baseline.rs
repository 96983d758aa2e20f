use serde::{Deserialize, Serialize};

use super::{check_window, MaskPrediction, SegmentError, Segmenter, WINDOW};
use crate::renderer::{median_background, Image};
use crate::tracker::connected_components;

/// Median background subtraction with a soft threshold and morphological cleanup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    /// Difference level mapped to probability 0; `2τ` maps to 1.
    pub tau: f64,
    pub morph_radius: u32,
    pub min_area: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { tau: 0.05, morph_radius: 1, min_area: 4 }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<(), SegmentError> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(SegmentError::InvalidParams(format!("tau must lie in (0, 1), got {}", self.tau)));
        }
        Ok(())
    }
}

impl Segmenter for BaselineParams {
    fn segment(&mut self, frames: &[Image], frame_index: usize) -> Result<MaskPrediction, SegmentError> {
        baseline_segment(frames, frame_index, self)
    }
}

pub fn baseline_segment(frames: &[Image], frame_index: usize, params: &BaselineParams) -> Result<MaskPrediction, SegmentError> {
    params.validate()?;
    let (w, h) = check_window(frames)?;
    let background = median_background(frames).map_err(|_| SegmentError::SizeMismatch)?;
    let middle = &frames[WINDOW / 2];
    let tau = params.tau as f32;

    let (mid, bg) = (middle.data(), background.data());
    let prob: Vec<f32> = (0..(w * h) as usize)
        .map(|p| {
            let d = (0..3).map(|c| (mid[3 * p + c] - bg[3 * p + c]).abs()).fold(0.0f32, f32::max);
            ((d - tau) / tau).clamp(0.0, 1.0)
        })
        .collect();

    let offsets = disc_offsets(params.morph_radius);
    let opened = dilate(&erode(&prob, w, h, &offsets), w, h, &offsets);
    let mut closed = erode(&dilate(&opened, w, h, &offsets), w, h, &offsets);

    if params.min_area > 1 {
        let support = Image::from_vec(w, h, 1, closed.iter().map(|&v| f32::from(u8::from(v > 0.0))).collect())
            .expect("mask shape");
        for blob in connected_components(&support) {
            if blob.area < params.min_area {
                for (x, y) in blob.pixels {
                    closed[(y * w + x) as usize] = 0.0;
                }
            }
        }
    }
    let prob = Image::from_vec(w, h, 1, closed).expect("mask shape");
    Ok(MaskPrediction { prob, frame_index })
}

fn disc_offsets(radius: u32) -> Vec<(i64, i64)> {
    let r = i64::from(radius);
    (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).filter(|(dx, dy)| dx * dx + dy * dy <= r * r).collect()
}

/// Min (erosion) or max (dilation) over the structuring element, ignoring
/// out-of-image neighbours.
fn morph(src: &[f32], w: u32, h: u32, offsets: &[(i64, i64)], erode: bool) -> Vec<f32> {
    let (wi, hi) = (i64::from(w), i64::from(h));
    let mut out = vec![0.0f32; src.len()];
    for y in 0..hi {
        for x in 0..wi {
            let mut acc = if erode { f32::INFINITY } else { f32::NEG_INFINITY };
            for &(dx, dy) in offsets {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= wi || ny >= hi {
                    continue;
                }
                let v = src[(ny * wi + nx) as usize];
                acc = if erode { acc.min(v) } else { acc.max(v) };
            }
            out[(y * wi + x) as usize] = acc;
        }
    }
    out
}

fn erode(src: &[f32], w: u32, h: u32, offsets: &[(i64, i64)]) -> Vec<f32> {
    morph(src, w, h, offsets, true)
}

fn dilate(src: &[f32], w: u32, h: u32, offsets: &[(i64, i64)]) -> Vec<f32> {
    morph(src, w, h, offsets, false)
}
