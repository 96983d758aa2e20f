use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::bbox::BBox;
use crate::renderer::Image;

/// Sorted, deduplicated linear pixel indices on a `width`×`height` grid.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PixelSet {
    width: u32,
    height: u32,
    pixels: Vec<u32>,
}

impl PixelSet {
    pub fn empty(width: u32, height: u32) -> Self {
        Self { width, height, pixels: Vec::new() }
    }

    pub fn from_indices(width: u32, height: u32, mut pixels: Vec<u32>) -> Result<Self, MetricsError> {
        pixels.sort_unstable();
        pixels.dedup();
        if pixels.last().is_some_and(|&p| p >= width * height) {
            return Err(MetricsError::OutOfBounds);
        }
        Ok(Self { width, height, pixels })
    }

    /// Pixels where channel 0 exceeds `threshold`.
    pub fn from_mask(mask: &Image, threshold: f64) -> Self {
        let c = mask.channels() as usize;
        let pixels = (0..mask.width() * mask.height()).filter(|&p| f64::from(mask.data()[p as usize * c]) > threshold).collect();
        Self { width: mask.width(), height: mask.height(), pixels }
    }

    pub fn from_bbox(b: BBox, width: u32, height: u32) -> Result<Self, MetricsError> {
        if !b.within(width, height) {
            return Err(MetricsError::OutOfBounds);
        }
        let pixels = (b.y..b.y + b.h).flat_map(|y| (b.x..b.x + b.w).map(move |x| y * width + x)).collect();
        Ok(Self { width, height, pixels })
    }

    /// Even-odd fill sampled at pixel centers `(x + 0.5, y + 0.5)`; vertices
    /// are in continuous image coordinates with the origin at the top-left
    /// corner of pixel (0, 0). Parts outside the grid are cropped.
    pub fn from_polygon(vertices: &[[f64; 2]], width: u32, height: u32) -> Self {
        let mut pixels = Vec::new();
        let n = vertices.len();
        if n >= 3 {
            let mut crossings = Vec::new();
            for y in 0..height {
                let yc = f64::from(y) + 0.5;
                crossings.clear();
                for i in 0..n {
                    let [x0, y0] = vertices[i];
                    let [x1, y1] = vertices[(i + 1) % n];
                    if (y0 <= yc) != (y1 <= yc) {
                        crossings.push(x0 + (yc - y0) * (x1 - x0) / (y1 - y0));
                    }
                }
                crossings.sort_by(f64::total_cmp);
                for pair in crossings.chunks_exact(2) {
                    // pixels whose center lies in [a, b)
                    let first = (pair[0] - 0.5).ceil().max(0.0);
                    let last = (pair[1] - 0.5).ceil().min(f64::from(width));
                    let mut x = first;
                    while x < last {
                        pixels.push(y * width + x as u32);
                        x += 1.0;
                    }
                }
            }
        }
        pixels.sort_unstable();
        pixels.dedup();
        Self { width, height, pixels }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn indices(&self) -> &[u32] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn intersection_len(&self, other: &PixelSet) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.pixels.len() && j < other.pixels.len() {
            match self.pixels[i].cmp(&other.pixels[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Tight bounding box, `None` when empty.
    pub fn bbox(&self) -> Option<BBox> {
        let (&first, &last) = (self.pixels.first()?, self.pixels.last()?);
        let (mut x0, mut x1) = (u32::MAX, 0);
        for &p in &self.pixels {
            x0 = x0.min(p % self.width);
            x1 = x1.max(p % self.width);
        }
        let (y0, y1) = (first / self.width, last / self.width);
        Some(BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1))
    }
}

/// Intersection over union; undefined when both sets are empty.
pub fn iou(a: &PixelSet, b: &PixelSet) -> Result<f64, MetricsError> {
    if (a.width, a.height) != (b.width, b.height) {
        return Err(MetricsError::GridMismatch);
    }
    if a.is_empty() && b.is_empty() {
        return Err(MetricsError::EmptyUnion);
    }
    let inter = a.intersection_len(b);
    Ok(inter as f64 / (a.len() + b.len() - inter) as f64)
}

/// Region as written in ground-truth files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Region {
    Polygon(Vec<[f64; 2]>),
    BBox(BBox),
    /// Path to a grayscale image, nonzero = inside; relative paths resolve
    /// against the ground-truth file's directory.
    Mask(std::path::PathBuf),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iou_examples() {
        let a = PixelSet::from_bbox(BBox::new(0, 0, 10, 10), 20, 20).unwrap();
        let b = PixelSet::from_bbox(BBox::new(5, 0, 10, 10), 20, 20).unwrap();
        assert!((iou(&a, &b).unwrap() - 50.0 / 150.0).abs() < 1e-9);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        let c = PixelSet::from_bbox(BBox::new(15, 15, 5, 5), 20, 20).unwrap();
        assert_eq!(iou(&a, &c).unwrap(), 0.0);
        assert_eq!(iou(&a, &b).unwrap(), iou(&b, &a).unwrap());
        let e = PixelSet::empty(20, 20);
        assert!(matches!(iou(&e, &e), Err(MetricsError::EmptyUnion)));
        assert_eq!(iou(&a, &e).unwrap(), 0.0);
        assert!(PixelSet::from_bbox(BBox::new(15, 0, 10, 1), 20, 20).is_err());
    }

    #[test]
    fn axis_aligned_polygon_matches_bbox() {
        let poly = PixelSet::from_polygon(&[[2.0, 3.0], [9.0, 3.0], [9.0, 7.0], [2.0, 7.0]], 12, 10);
        assert_eq!(poly, PixelSet::from_bbox(BBox::new(2, 3, 7, 4), 12, 10).unwrap());
        assert_eq!(poly.bbox(), Some(BBox::new(2, 3, 7, 4)));
    }

    #[test]
    fn triangle_fill_by_center_test() {
        let tri = [[0.0, 0.0], [8.0, 0.0], [0.0, 8.0]];
        let set = PixelSet::from_polygon(&tri, 10, 10);
        let brute: Vec<u32> = (0..100u32)
            .filter(|p| {
                let (x, y) = (f64::from(p % 10) + 0.5, f64::from(p / 10) + 0.5);
                x + y < 8.0
            })
            .collect();
        assert_eq!(set.indices(), &brute[..]);
    }

    #[test]
    fn self_overlapping_polygon_uses_even_odd() {
        // outer square wound twice around an inner one leaves a hole
        let ring = [
            [0.0, 0.0], [6.0, 0.0], [6.0, 6.0], [0.0, 6.0], [0.0, 0.0],
            [2.0, 2.0], [2.0, 4.0], [4.0, 4.0], [4.0, 2.0], [2.0, 2.0],
        ];
        let set = PixelSet::from_polygon(&ring, 6, 6);
        assert_eq!(set.len(), 32);
        assert!(!set.indices().contains(&(2 * 6 + 2)));
    }

    #[test]
    fn polygon_outside_grid_is_cropped() {
        let set = PixelSet::from_polygon(&[[-5.0, -5.0], [3.0, -5.0], [3.0, 2.0], [-5.0, 2.0]], 10, 10);
        assert_eq!(set, PixelSet::from_bbox(BBox::new(0, 0, 3, 2), 10, 10).unwrap());
    }

    #[test]
    fn mask_and_bbox() {
        let mut m = Image::zeros(6, 5, 1);
        m.set(1, 2, 0, 1.0);
        m.set(4, 3, 0, 0.7);
        let set = PixelSet::from_mask(&m, 0.5);
        assert_eq!(set.indices(), &[13, 22]);
        assert_eq!(set.bbox(), Some(BBox::new(1, 2, 4, 2)));
        assert_eq!(PixelSet::empty(3, 3).bbox(), None);
    }
}
