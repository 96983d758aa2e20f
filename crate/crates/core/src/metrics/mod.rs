//! Detection evaluation: IoU matching with one true positive per object,
//! precision / recall / F1 and tabular reports.

mod ground_truth;
mod region;
mod report;

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ground_truth::{load_ground_truth, FrameGroundTruth, GroundTruthFile};
pub use region::{iou, PixelSet, Region};
pub use report::{Report, ReportRow};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("IoU of two empty regions is undefined")]
    EmptyUnion,
    #[error("regions live on different pixel grids")]
    GridMismatch,
    #[error("region extends outside the image")]
    OutOfBounds,
    #[error("IoU threshold must lie in (0, 1), got {0}")]
    Threshold(f64),
    #[error("a report needs at least one sequence")]
    EmptyReport,
    #[error("ground truth: {0}")]
    GroundTruth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Counts {
    pub fn new(tp: u64, fp: u64, fn_: u64) -> Self {
        Self { tp, fp, fn_ }
    }

    pub fn metrics(&self) -> Metrics {
        Metrics::from_counts(*self)
    }
}

impl Add for Counts {
    type Output = Counts;
    fn add(self, o: Counts) -> Counts {
        Counts::new(self.tp + o.tp, self.fp + o.fp, self.fn_ + o.fn_)
    }
}

impl AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        *self = *self + o;
    }
}

impl std::iter::Sum for Counts {
    fn sum<I: Iterator<Item = Counts>>(iter: I) -> Counts {
        iter.fold(Counts::default(), Add::add)
    }
}

/// Precision, recall and F1 in [0, 1]; a zero denominator yields 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl Metrics {
    pub fn from_counts(c: Counts) -> Self {
        Self {
            precision: ratio(c.tp, c.tp + c.fp),
            recall: ratio(c.tp, c.tp + c.fn_),
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
        }
    }
}

/// Harmonic mean of precision and recall, 0 when both are 0.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Counts for one frame from `iou[g][d]` (ground truth × detection).
///
/// Each ground truth claims the detection with the highest IoU above
/// `threshold`, ties going to the lower detection index. Every claimed
/// detection is one true positive; other detections are false positives and
/// ground truths without a true positive are false negatives.
pub fn counts_from_iou(iou: &[Vec<f64>], n_detections: usize, threshold: f64) -> Counts {
    let mut claimed = vec![false; n_detections];
    for row in iou {
        let mut best: Option<(usize, f64)> = None;
        for (d, &v) in row.iter().enumerate() {
            if v > threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((d, v));
            }
        }
        if let Some((d, _)) = best {
            claimed[d] = true;
        }
    }
    let tp = claimed.iter().filter(|&&c| c).count() as u64;
    Counts::new(tp, n_detections as u64 - tp, iou.len() as u64 - tp)
}

/// Matches one frame's detections against its ground truth. Empty regions are
/// ignored on both sides.
pub fn match_frame(detections: &[PixelSet], ground_truth: &[PixelSet], threshold: f64) -> Result<Counts, MetricsError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(MetricsError::Threshold(threshold));
    }
    let dets: Vec<&PixelSet> = detections.iter().filter(|d| !d.is_empty()).collect();
    let matrix = ground_truth
        .iter()
        .filter(|g| !g.is_empty())
        .map(|g| dets.iter().map(|d| iou(g, d)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(counts_from_iou(&matrix, dets.len(), threshold))
}
