//! Frame synthesis: sprites, median backgrounds, compositing and ground truth.

mod background;
mod compose;
mod gt;
mod image;
pub mod io;
mod sprite;

use thiserror::Error;

pub use self::image::Image;
pub use background::{median_background, procedural_clip, sliding_median, BackgroundStyle};
pub use compose::{splat_sprite, synthesize_frame, RenderParams, Splat};
pub use gt::{make_gt_mask, GtMask};
pub use sprite::{defocus, tint_and_resize, BallTemplate, ForegroundSprite};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("expected {expected} channels, got {actual}")]
    Channels { expected: u32, actual: u32 },
    #[error("expected {expected} samples, got {actual}")]
    DataLength { expected: usize, actual: usize },
    #[error("value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("image sizes differ")]
    SizeMismatch,
    #[error("expected {expected} frames, got {actual}")]
    FrameCount { expected: usize, actual: usize },
    #[error("diameter {0} px is below the 2 px minimum")]
    DiameterTooSmall(f64),
    #[error("PSF pixel ({x}, {y}) lies outside the image")]
    PsfOutOfBounds { x: u32, y: u32 },
    #[error("sprite is larger than the background")]
    SpriteTooLarge,
    #[error("invalid render parameters: {0}")]
    InvalidParams(String),
    #[error("io: {0}")]
    Io(String),
}
