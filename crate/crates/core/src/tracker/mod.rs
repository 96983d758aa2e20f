//! Blob selection by size and elongation, bridged by a constant-velocity
//! Kalman filter across missed frames.

mod components;
mod kalman;
mod track;

use thiserror::Error;

pub use components::{connected_components, score_blob, select_blob, Blob, ScoreWeights, ELONGATION_EPS};
pub use kalman::KalmanState;
pub use track::{track_sequence, Track, TrackEntry, TrackStatus, TrackerParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackError {
    #[error("invalid tracker parameters: {0}")]
    InvalidParams(String),
    #[error("kalman filter numerical failure: {0}")]
    NumericalFailure(&'static str),
    #[error("track io: {0}")]
    Io(String),
}
