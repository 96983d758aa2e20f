//! Random object trajectories under a simulated camera, and their per-frame
//! path point-spread functions.
//!
//! Coordinates are continuous pixel coordinates with `y` growing downward.
//! Pixel `(i, j)` has its center at `(i, j)` and covers `[i - 0.5, i + 0.5]`
//! horizontally. Time is measured in frame periods; frame `t` spans `[t, t + 1)`
//! and its shutter is open over the first `exposure_fraction` of that span.

mod psf;
mod trajectory;

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use psf::{rasterize_psf, PathPsf, PsfEntry};
pub use trajectory::{generate_trajectory, label_fmo, EventKind, Sample, Trajectory, TrajectoryEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid trajectory config: {0}")]
    InvalidConfig(String),
    #[error("invalid arena: {0}")]
    InvalidArena(String),
    #[error("speed_max {speed_max} px/frame does not fit in a {width}x{height} arena")]
    SpeedExceedsArena { speed_max: f64, width: u32, height: u32 },
    #[error("could not place the object after {0} attempts")]
    PlacementFailed(usize),
    #[error("frame {frame} out of range (trajectory has {n_frames} frames)")]
    FrameOutOfRange { frame: usize, n_frames: usize },
    #[error("diameter must be positive, got {0}")]
    InvalidDiameter(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionState {
    /// px
    pub position: Vec2,
    /// px/frame
    pub velocity: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// Line `x = coord`.
    Vertical,
    /// Line `y = coord`.
    Horizontal,
}

/// One-sided axis-aligned bounce line.
///
/// Motion is reflected only when the path leaves the inside half-plane through
/// the segment `span` of the line; paths that start outside pass untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Surface {
    pub id: u32,
    pub axis: Axis,
    pub coord: f64,
    /// Extent along the line, `(min, max)`.
    pub span: (f64, f64),
    /// Whether the inside half-plane is on the side of increasing coordinate.
    pub inside_positive: bool,
}

impl Surface {
    /// Signed distance, positive on the inside.
    pub(crate) fn inside_distance(&self, p: Vec2) -> f64 {
        let d = match self.axis {
            Axis::Vertical => p.x - self.coord,
            Axis::Horizontal => p.y - self.coord,
        };
        if self.inside_positive {
            d
        } else {
            -d
        }
    }

    pub(crate) fn along(&self, p: Vec2) -> f64 {
        match self.axis {
            Axis::Vertical => p.y,
            Axis::Horizontal => p.x,
        }
    }

    fn distance_to(&self, p: Vec2) -> f64 {
        let normal = self.inside_distance(p).abs();
        let t = self.along(p);
        let along = if t < self.span.0 {
            self.span.0 - t
        } else if t > self.span.1 {
            t - self.span.1
        } else {
            0.0
        };
        normal.hypot(along)
    }
}

pub const SURFACE_LEFT: u32 = 0;
pub const SURFACE_RIGHT: u32 = 1;
pub const SURFACE_TOP: u32 = 2;
pub const SURFACE_FLOOR: u32 = 3;
pub const SURFACE_TABLE: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArenaConfig {
    pub width: u32,
    pub height: u32,
    pub surfaces: Vec<Surface>,
    /// Minimum distance between the start position and any surface or image edge.
    pub placement_margin: f64,
}

impl ArenaConfig {
    /// Image-sized arena with the four borders as bounce surfaces.
    pub fn new(width: u32, height: u32) -> Self {
        Self::with_inset(width, height, 0.0)
    }

    /// Borders pulled in by `inset` px, so a ball of radius `inset` bounces
    /// when its edge, not its center, meets the image border.
    pub fn with_inset(width: u32, height: u32, inset: f64) -> Self {
        let x_max = f64::from(width) - 1.0 - inset;
        let y_max = f64::from(height) - 1.0 - inset;
        let (x_span, y_span) = ((inset, x_max), (inset, y_max));
        let surfaces = vec![
            Surface { id: SURFACE_LEFT, axis: Axis::Vertical, coord: inset, span: y_span, inside_positive: true },
            Surface { id: SURFACE_RIGHT, axis: Axis::Vertical, coord: x_max, span: y_span, inside_positive: false },
            Surface { id: SURFACE_TOP, axis: Axis::Horizontal, coord: inset, span: x_span, inside_positive: true },
            Surface { id: SURFACE_FLOOR, axis: Axis::Horizontal, coord: y_max, span: x_span, inside_positive: false },
        ];
        Self { width, height, surfaces, placement_margin: inset.max(1.0) }
    }

    /// Adds a horizontal table top at height `y`, bouncing objects that fall on it.
    pub fn add_table(&mut self, y: f64, x_min: f64, x_max: f64) {
        self.surfaces.push(Surface {
            id: SURFACE_TABLE,
            axis: Axis::Horizontal,
            coord: y,
            span: (x_min, x_max),
            inside_positive: false,
        });
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width < 16 || self.height < 16 {
            return Err(SynthError::InvalidArena(format!(
                "arena {}x{} is smaller than 16x16",
                self.width, self.height
            )));
        }
        let (w, h) = (f64::from(self.width) - 1.0, f64::from(self.height) - 1.0);
        for s in &self.surfaces {
            let (limit_coord, limit_span) = match s.axis {
                Axis::Vertical => (w, h),
                Axis::Horizontal => (h, w),
            };
            let ok = s.coord.is_finite()
                && (0.0..=limit_coord).contains(&s.coord)
                && s.span.0 <= s.span.1
                && s.span.0 >= 0.0
                && s.span.1 <= limit_span;
            if !ok {
                return Err(SynthError::InvalidArena(format!("surface {} lies outside the image", s.id)));
            }
        }
        if !(self.placement_margin >= 0.0) {
            return Err(SynthError::InvalidArena("placement_margin must be nonnegative".into()));
        }
        Ok(())
    }

    pub(crate) fn placement_ok(&self, p: Vec2) -> bool {
        self.surfaces.iter().all(|s| s.distance_to(p) >= self.placement_margin)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    /// px/frame
    pub speed_min: f64,
    /// px/frame
    pub speed_max: f64,
    /// px/frame²
    pub gravity: Vec2,
    pub restitution: f64,
    /// Per-frame probability of a racket-like velocity redraw.
    pub p_hit: f64,
    pub p_occlusion: f64,
    /// Inclusive range of occlusion durations in frames.
    pub occlusion_len: (u32, u32),
    pub p_stop: f64,
    /// Fraction of each frame period during which the shutter is open.
    pub exposure_fraction: f64,
    /// Samples recorded per frame exposure.
    pub substeps_per_frame: u32,
    pub n_frames: u32,
    /// Fixes the initial state instead of drawing it.
    pub initial: Option<MotionState>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            speed_min: 8.0,
            speed_max: 20.0,
            gravity: Vec2::new(0.0, 0.15),
            restitution: 0.8,
            p_hit: 0.02,
            p_occlusion: 0.02,
            occlusion_len: (1, 3),
            p_stop: 0.005,
            exposure_fraction: 0.9,
            substeps_per_frame: 64,
            n_frames: 9,
            initial: None,
        }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if !(self.speed_min > 0.0 && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return bad("require 0 < speed_min <= speed_max");
        }
        if !self.gravity.is_finite() {
            return bad("gravity must be finite");
        }
        if !(self.restitution > 0.0 && self.restitution <= 1.0) {
            return bad("restitution must lie in (0, 1]");
        }
        for (name, p) in [("p_hit", self.p_hit), ("p_occlusion", self.p_occlusion), ("p_stop", self.p_stop)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if self.occlusion_len.0 == 0 || self.occlusion_len.0 > self.occlusion_len.1 {
            return bad("occlusion_len must be a nonempty range of positive frame counts");
        }
        if !(self.exposure_fraction > 0.0 && self.exposure_fraction <= 1.0) {
            return bad("exposure_fraction must lie in (0, 1]");
        }
        if self.substeps_per_frame < 8 {
            return bad("substeps_per_frame must be at least 8");
        }
        if self.n_frames < 5 {
            return bad("n_frames must be at least 5");
        }
        if let Some(init) = &self.initial {
            if !init.position.is_finite() || !init.velocity.is_finite() {
                return bad("initial state must be finite");
            }
        }
        Ok(())
    }
}
