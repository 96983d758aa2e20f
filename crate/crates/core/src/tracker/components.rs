use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::TrackError;
use crate::bbox::BBox;
use crate::renderer::Image;
use crate::synthgen::Vec2;

/// Regularizer for the elongation ratio, so one-pixel-wide blobs (λ2 = 0) stay finite.
pub const ELONGATION_EPS: f64 = 1e-6;

/// 8-connected foreground component with its second-order shape statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    /// `(x, y)` in discovery order.
    pub pixels: Vec<(u32, u32)>,
    pub area: usize,
    pub centroid: Vec2,
    pub mu20: f64,
    pub mu02: f64,
    pub mu11: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub elongation: f64,
    pub bbox: BBox,
}

impl Blob {
    fn from_pixels(pixels: Vec<(u32, u32)>) -> Self {
        let n = pixels.len() as i128;
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy) = (0i128, 0i128, 0i128, 0i128, 0i128);
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for &(x, y) in &pixels {
            let (xi, yi) = (i128::from(x), i128::from(y));
            sx += xi;
            sy += yi;
            sxx += xi * xi;
            syy += yi * yi;
            sxy += xi * yi;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        // exact integer numerators, one rounding per moment
        let n2 = (n * n) as f64;
        let mu20 = (n * sxx - sx * sx) as f64 / n2;
        let mu02 = (n * syy - sy * sy) as f64 / n2;
        let mu11 = (n * sxy - sx * sy) as f64 / n2;
        let (lambda1, lambda2) = eigen_sym2(mu20, mu02, mu11);
        let elongation = 1.0 - (lambda2 + ELONGATION_EPS) / (lambda1 + ELONGATION_EPS);
        Self {
            area: pixels.len(),
            centroid: Vec2::new(sx as f64 / n as f64, sy as f64 / n as f64),
            mu20,
            mu02,
            mu11,
            lambda1,
            lambda2,
            elongation,
            bbox: BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
            pixels,
        }
    }

    /// Length of a uniform line segment with the same major-axis variance.
    pub fn streak_length(&self) -> f64 {
        (12.0 * self.lambda1).sqrt().max(1.0)
    }
}

/// Eigenvalues `λ1 ≥ λ2 ≥ 0` of `[[a, c], [c, b]]`.
fn eigen_sym2(a: f64, b: f64, c: f64) -> (f64, f64) {
    let mean = 0.5 * (a + b);
    let r = (0.25 * (a - b) * (a - b) + c * c).sqrt();
    ((mean + r).max(0.0), (mean - r).max(0.0))
}

/// Labels the nonzero pixels of a single-channel mask, in raster order of
/// each component's first pixel.
pub fn connected_components(mask: &Image) -> Vec<Blob> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; (w * h) as usize];
    let mut blobs = Vec::new();
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if seen[i] || mask.get(x, y, 0) == 0.0 {
                continue;
            }
            seen[i] = true;
            queue.push_back((x, y));
            let mut pixels = Vec::new();
            while let Some((px, py)) = queue.pop_front() {
                pixels.push((px, py));
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let (nx, ny) = (i64::from(px) + dx, i64::from(py) + dy);
                        if nx < 0 || ny < 0 || nx >= i64::from(w) || ny >= i64::from(h) {
                            continue;
                        }
                        let j = (ny as u32 * w + nx as u32) as usize;
                        if !seen[j] && mask.get(nx as u32, ny as u32, 0) != 0.0 {
                            seen[j] = true;
                            queue.push_back((nx as u32, ny as u32));
                        }
                    }
                }
            }
            blobs.push(Blob::from_pixels(pixels));
        }
    }
    blobs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreWeights {
    pub area: f64,
    pub elongation: f64,
}

impl Default for ScoreWeights {
    fn default() -> Self {
        Self { area: 0.5, elongation: 0.5 }
    }
}

impl ScoreWeights {
    pub fn validate(&self) -> Result<(), TrackError> {
        if self.area < 0.0 || self.elongation < 0.0 || (self.area + self.elongation - 1.0).abs() > 1e-9 {
            return Err(TrackError::InvalidParams(format!(
                "score weights must be nonnegative and sum to 1, got ({}, {})",
                self.area, self.elongation
            )));
        }
        Ok(())
    }
}

/// `w_a · area / max_area + w_e · elongation`; `None` when `all` is empty.
pub fn score_blob(blob: &Blob, all: &[Blob], weights: ScoreWeights) -> Option<f64> {
    let max_area = all.iter().map(|b| b.area).max()?;
    Some(weights.area * blob.area as f64 / max_area as f64 + weights.elongation * blob.elongation)
}

/// Index and score of the best blob among `candidates` (indices into `all`);
/// ties go to the lower index.
pub fn select_blob(all: &[Blob], candidates: impl IntoIterator<Item = usize>, weights: ScoreWeights) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for i in candidates {
        let s = score_blob(&all[i], all, weights)?;
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((i, s));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mask_from(w: u32, h: u32, on: &[(u32, u32)]) -> Image {
        let mut m = Image::zeros(w, h, 1);
        for &(x, y) in on {
            m.set(x, y, 0, 1.0);
        }
        m
    }

    /// Central moments from pairwise-deviation integer sums: Σ(n·x − Σx)² / n³.
    fn brute_moments(pixels: &[(u32, u32)]) -> (f64, f64, f64) {
        let n = pixels.len() as i128;
        let sx: i128 = pixels.iter().map(|p| i128::from(p.0)).sum();
        let sy: i128 = pixels.iter().map(|p| i128::from(p.1)).sum();
        let mut a = (0i128, 0i128, 0i128);
        for &(x, y) in pixels {
            let dx = n * i128::from(x) - sx;
            let dy = n * i128::from(y) - sy;
            a.0 += dx * dx;
            a.1 += dy * dy;
            a.2 += dx * dy;
        }
        let n3 = (n * n * n) as f64;
        (a.0 as f64 / n3, a.1 as f64 / n3, a.2 as f64 / n3)
    }

    #[test]
    fn horizontal_run_of_five() {
        let m = mask_from(8, 3, &[(1, 1), (2, 1), (3, 1), (4, 1), (5, 1)]);
        let blobs = connected_components(&m);
        assert_eq!(blobs.len(), 1);
        let b = &blobs[0];
        assert_eq!(b.area, 5);
        assert_eq!(b.mu20, 2.0);
        assert_eq!(b.mu02, 0.0);
        assert_eq!(b.mu11, 0.0);
        assert_eq!(b.elongation, 1.0 - ELONGATION_EPS / (2.0 + ELONGATION_EPS));
        assert_eq!(b.bbox, BBox::new(1, 1, 5, 1));
        assert_eq!(b.centroid, Vec2::new(3.0, 1.0));
    }

    #[test]
    fn solid_square_is_isotropic() {
        let on: Vec<_> = (0..3).flat_map(|y| (0..3).map(move |x| (x + 2, y + 2))).collect();
        let b = &connected_components(&mask_from(7, 7, &on))[0];
        assert_eq!(b.mu20, 2.0 / 3.0);
        assert_eq!(b.mu02, 2.0 / 3.0);
        assert_eq!(b.mu11, 0.0);
        assert_eq!(b.elongation, 0.0);
    }

    #[test]
    fn diagonal_neighbours_join() {
        let blobs = connected_components(&mask_from(4, 4, &[(0, 0), (1, 1)]));
        assert_eq!(blobs.len(), 1);
        let blobs = connected_components(&mask_from(4, 4, &[(0, 0), (2, 2), (3, 0)]));
        assert_eq!(blobs.len(), 3);
        assert!(connected_components(&Image::zeros(4, 4, 1)).is_empty());
    }

    #[test]
    fn score_examples() {
        let single = connected_components(&mask_from(4, 4, &[(1, 1)]));
        let w = ScoreWeights { area: 1.0, elongation: 0.0 };
        assert_eq!(score_blob(&single[0], &single, w), Some(1.0));
        assert_eq!(score_blob(&single[0], &[], w), None);

        let mut a = single[0].clone();
        a.area = 100;
        a.elongation = 0.1;
        let mut b = single[0].clone();
        b.area = 50;
        b.elongation = 0.9;
        let all = [a.clone(), b.clone()];
        let half = ScoreWeights::default();
        assert!((score_blob(&a, &all, half).unwrap() - 0.55).abs() < 1e-12);
        assert!((score_blob(&b, &all, half).unwrap() - 0.70).abs() < 1e-12);
        assert_eq!(select_blob(&all, 0..2, half).unwrap().0, 1);
        assert_eq!(select_blob(&all, 0..2, w).unwrap().0, 0);
    }

    #[test]
    fn argmax_survives_nearest_upscale() {
        // a compact 3x3 blob and a longer but thin streak
        let mut on: Vec<(u32, u32)> = (0..3).flat_map(|y| (0..3).map(move |x| (x + 1, y + 1))).collect();
        on.extend((0..8).map(|k| (6 + k, 9 + k / 4)));
        let m = mask_from(20, 14, &on);
        let w = ScoreWeights::default();
        let pick = |m: &Image| {
            let blobs = connected_components(m);
            let (i, _) = select_blob(&blobs, 0..blobs.len(), w).unwrap();
            blobs[i].bbox
        };
        let small = pick(&m);
        let big = pick(&m.upscale_nearest(2));
        assert_eq!((big.x, big.y), (small.x * 2, small.y * 2));
    }

    proptest! {
        #[test]
        fn moments_equal_brute_force(w in 1u32..=15, h in 1u32..=15, bits in proptest::collection::vec(any::<bool>(), 225)) {
            let on: Vec<(u32, u32)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y)))
                .filter(|&(x, y)| bits[(y * 15 + x) as usize]).collect();
            let m = mask_from(w, h, &on);
            for b in connected_components(&m) {
                let (m20, m02, m11) = brute_moments(&b.pixels);
                prop_assert_eq!(b.mu20, m20);
                prop_assert_eq!(b.mu02, m02);
                prop_assert_eq!(b.mu11, m11);
                prop_assert!(b.lambda1 >= b.lambda2 && b.lambda2 >= 0.0);
                prop_assert!((0.0..1.0).contains(&b.elongation));
            }
        }
    }
}
