//! Streak segmentation over 5-frame windows.

mod baseline;
mod external;
pub mod protocol;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::renderer::Image;

pub use baseline::{baseline_segment, BaselineParams};
pub use external::{ExternalParams, ExternalSegmenter};
pub use protocol::ProtocolError;

pub const WINDOW: usize = 5;

/// Per-pixel foreground probability for a window's middle frame.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskPrediction {
    pub prob: Image,
    pub frame_index: usize,
}

impl MaskPrediction {
    pub fn validate(&self, width: u32, height: u32) -> Result<(), SegmentError> {
        if self.prob.channels() != 1 || self.prob.width() != width || self.prob.height() != height {
            return Err(SegmentError::SizeMismatch);
        }
        if let Some(&v) = self.prob.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(SegmentError::OutOfRange(f64::from(v)));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("expected {WINDOW} frames, got {0}")]
    FrameCount(usize),
    #[error("window frames must share one size and have 3 channels")]
    SizeMismatch,
    #[error("mask value {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("invalid segmenter parameters: {0}")]
    InvalidParams(String),
    #[error("segmenter failed on frame {frame}: {source}")]
    External { frame: usize, source: ProtocolError },
}

pub trait Segmenter {
    /// Segments the middle frame of `frames`; `frame_index` labels it.
    fn segment(&mut self, frames: &[Image], frame_index: usize) -> Result<MaskPrediction, SegmentError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SegmenterSpec {
    Baseline(BaselineParams),
    External(ExternalParams),
}

impl Default for SegmenterSpec {
    fn default() -> Self {
        Self::Baseline(BaselineParams::default())
    }
}

impl SegmenterSpec {
    pub fn validate(&self) -> Result<(), SegmentError> {
        match self {
            Self::Baseline(p) => p.validate(),
            Self::External(p) => p.validate(),
        }
    }

    pub fn build(&self) -> Result<Box<dyn Segmenter + Send>, SegmentError> {
        self.validate()?;
        Ok(match self {
            Self::Baseline(p) => Box::new(p.clone()),
            Self::External(p) => Box::new(ExternalSegmenter::spawn(p.clone()).map_err(|source| SegmentError::External { frame: 0, source })?),
        })
    }
}

/// Checks the window shape, returning `(width, height)`.
pub fn check_window(frames: &[Image]) -> Result<(u32, u32), SegmentError> {
    if frames.len() != WINDOW {
        return Err(SegmentError::FrameCount(frames.len()));
    }
    let first = &frames[0];
    if first.channels() != 3 || frames.iter().any(|f| !f.same_shape(first)) {
        return Err(SegmentError::SizeMismatch);
    }
    Ok((first.width(), first.height()))
}

/// Row-major, channel-minor 15-channel stack: pixel `(x, y)` holds the RGB of
/// frame 1, then frame 2, and so on.
pub fn stack_channels(frames: &[Image]) -> Result<Vec<f32>, SegmentError> {
    let (w, h) = check_window(frames)?;
    let mut out = Vec::with_capacity((w * h) as usize * 3 * WINDOW);
    for p in 0..(w * h) as usize {
        for f in frames {
            out.extend_from_slice(&f.data()[3 * p..3 * p + 3]);
        }
    }
    Ok(out)
}
