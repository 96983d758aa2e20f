use serde::{Deserialize, Serialize};

/// Pixel-aligned box covering columns `x..x + w` and rows `y..y + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<[u32; 4]> for BBox {
    fn from([x, y, w, h]: [u32; 4]) -> Self {
        Self { x, y, w, h }
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Continuous center in pixel-center coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x) + (f64::from(self.w) - 1.0) / 2.0,
            f64::from(self.y) + (f64::from(self.h) - 1.0) / 2.0,
        )
    }

    /// Box of size `w`×`h` centered near `(cx, cy)`, shifted and cropped to
    /// lie inside a `width`×`height` image.
    pub fn centered(cx: f64, cy: f64, w: u32, h: u32, width: u32, height: u32) -> Self {
        let w = w.clamp(1, width);
        let h = h.clamp(1, height);
        let place = |c: f64, size: u32, limit: u32| -> u32 {
            let start = (c - (f64::from(size) - 1.0) / 2.0).round();
            start.clamp(0.0, f64::from(limit - size)) as u32
        };
        Self { x: place(cx, w, width), y: place(cy, h, height), w, h }
    }

    pub fn intersection(&self, other: &BBox) -> u64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 <= x0 || y1 <= y0 {
            0
        } else {
            u64::from(x1 - x0) * u64::from(y1 - y0)
        }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let inter = self.intersection(other);
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn within(&self, width: u32, height: u32) -> bool {
        self.x + self.w <= width && self.y + self.h <= height
    }
}
