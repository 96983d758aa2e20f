use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{connected_components, select_blob, Blob, KalmanState, ScoreWeights, TrackError};
use crate::bbox::BBox;
use crate::renderer::Image;
use crate::segment::MaskPrediction;
use crate::synthgen::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerParams {
    /// Probability above which a mask pixel is foreground.
    pub bin_threshold: f64,
    pub weights: ScoreWeights,
    /// Gate radius as a multiple of the last measured streak length.
    pub gate_factor: f64,
    /// Lower bound on the gate radius, px.
    pub min_gate: f64,
    /// Blobs smaller than this are ignored, px².
    pub min_area: usize,
    /// Consecutive predicted frames tolerated before the track is lost.
    pub max_gap: usize,
    pub q: f64,
    pub r: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self {
            bin_threshold: 0.5,
            weights: ScoreWeights::default(),
            gate_factor: 3.0,
            min_gate: 8.0,
            min_area: 1,
            max_gap: 5,
            q: 1.0,
            r: 1.0,
        }
    }
}

impl TrackerParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        self.weights.validate()?;
        if !(0.0..1.0).contains(&self.bin_threshold) {
            return Err(TrackError::InvalidParams("bin_threshold must lie in [0, 1)".into()));
        }
        if !(self.gate_factor > 0.0 && self.min_gate >= 0.0) {
            return Err(TrackError::InvalidParams("gate parameters must be positive".into()));
        }
        if !(self.q > 0.0 && self.r > 0.0) {
            return Err(TrackError::InvalidParams("q and r must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackStatus {
    Measured,
    Predicted,
    Lost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackEntry {
    pub frame: usize,
    pub status: TrackStatus,
    pub bbox: Option<BBox>,
    /// Blob score for measured frames.
    pub score: Option<f64>,
    /// Filter position for tracked frames, blob centroid for seed detections.
    #[serde(skip)]
    pub position: Option<Vec2>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Track {
    pub entries: Vec<TrackEntry>,
}

impl Track {
    /// One JSON object per line: `{frame, status, bbox, score}`.
    pub fn write_jsonl(&self, mut out: impl Write) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(input: impl BufRead) -> Result<Self, TrackError> {
        let mut entries = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| TrackError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let e: TrackEntry =
                serde_json::from_str(&line).map_err(|e| TrackError::Io(format!("line {}: {e}", n + 1)))?;
            entries.push(e);
        }
        Ok(Self { entries })
    }
}

fn binarize(prob: &Image, threshold: f64) -> Image {
    prob.map(|v| f64::from(u8::from(f64::from(v) > threshold)))
}

enum Phase {
    /// Waiting for two consecutive detections; holds the previous frame's one.
    Seeking(Option<Vec2>),
    Tracking { filter: KalmanState, gap: usize, size: (u32, u32), streak: f64 },
}

/// Follows a single object through time-ordered masks.
pub fn track_sequence(masks: &[MaskPrediction], params: &TrackerParams) -> Result<Track, TrackError> {
    params.validate()?;
    let mut phase = Phase::Seeking(None);
    let mut entries = Vec::with_capacity(masks.len());

    for mask in masks {
        let (width, height) = (mask.prob.width(), mask.prob.height());
        let blobs: Vec<Blob> = connected_components(&binarize(&mask.prob, params.bin_threshold))
            .into_iter()
            .filter(|b| b.area >= params.min_area)
            .collect();
        let frame = mask.frame_index;

        let entry = match phase {
            Phase::Seeking(prev) => match select_blob(&blobs, 0..blobs.len(), params.weights) {
                Some((i, score)) => {
                    let b = &blobs[i];
                    phase = match prev {
                        Some(p) => Phase::Tracking {
                            filter: KalmanState::new(b.centroid, b.centroid - p, params.q, params.r)?,
                            gap: 0,
                            size: (b.bbox.w, b.bbox.h),
                            streak: b.streak_length(),
                        },
                        None => Phase::Seeking(Some(b.centroid)),
                    };
                    TrackEntry { frame, status: TrackStatus::Measured, bbox: Some(b.bbox), score: Some(score), position: Some(b.centroid) }
                }
                None => {
                    phase = Phase::Seeking(None);
                    TrackEntry { frame, status: TrackStatus::Lost, bbox: None, score: None, position: None }
                }
            },
            Phase::Tracking { ref filter, gap, size, streak } => {
                let predicted = filter.predict();
                let center = predicted.position();
                let gate = (params.gate_factor * streak).max(params.min_gate);
                let gated = (0..blobs.len()).filter(|&i| (blobs[i].centroid - center).norm() <= gate);
                match select_blob(&blobs, gated, params.weights) {
                    Some((i, score)) => {
                        let b = &blobs[i];
                        let filter = predicted.update(b.centroid)?;
                        let position = filter.position();
                        phase = Phase::Tracking { filter, gap: 0, size: (b.bbox.w, b.bbox.h), streak: b.streak_length() };
                        TrackEntry { frame, status: TrackStatus::Measured, bbox: Some(b.bbox), score: Some(score), position: Some(position) }
                    }
                    None if gap < params.max_gap => {
                        let bbox = BBox::centered(center.x, center.y, size.0, size.1, width, height);
                        phase = Phase::Tracking { filter: predicted, gap: gap + 1, size, streak };
                        TrackEntry { frame, status: TrackStatus::Predicted, bbox: Some(bbox), score: None, position: Some(center) }
                    }
                    None => {
                        phase = Phase::Seeking(None);
                        TrackEntry { frame, status: TrackStatus::Lost, bbox: None, score: None, position: None }
                    }
                }
            }
        };
        entries.push(entry);
    }
    Ok(Track { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_mask(w: u32, h: u32, cx: i64, cy: i64, frame: usize) -> MaskPrediction {
        let prob = Image::from_fn(w, h, 1, |x, y, _| {
            f64::from(u8::from((i64::from(x) - cx).abs() <= 1 && (i64::from(y) - cy).abs() <= 1))
        });
        MaskPrediction { prob, frame_index: frame }
    }

    fn empty(w: u32, h: u32, frame: usize) -> MaskPrediction {
        MaskPrediction { prob: Image::zeros(w, h, 1), frame_index: frame }
    }

    #[test]
    fn straight_track_is_fully_measured() {
        let masks: Vec<_> = (0..10).map(|k| square_mask(80, 40, 5 + 6 * k, 10 + 2 * k, k as usize)).collect();
        let track = track_sequence(&masks, &TrackerParams::default()).unwrap();
        assert!(track.entries.iter().all(|e| e.status == TrackStatus::Measured));
        for (k, e) in track.entries.iter().enumerate() {
            let k = k as u32;
            assert_eq!(e.bbox, Some(BBox::new(4 + 6 * k, 9 + 2 * k, 3, 3)));
        }
    }

    #[test]
    fn short_gap_is_bridged_on_the_linear_continuation() {
        let mut masks: Vec<_> = (0..10).map(|k| square_mask(100, 60, 5 + 7 * k, 40 - 3 * k, k as usize)).collect();
        masks[5] = empty(100, 60, 5);
        masks[6] = empty(100, 60, 6);
        let params = TrackerParams { max_gap: 4, ..TrackerParams::default() };
        let track = track_sequence(&masks, &params).unwrap();
        for k in [5usize, 6] {
            let e = &track.entries[k];
            assert_eq!(e.status, TrackStatus::Predicted);
            let truth = Vec2::new(5.0 + 7.0 * k as f64, 40.0 - 3.0 * k as f64);
            assert!((e.position.unwrap() - truth).norm() <= 1.0);
            let (cx, cy) = e.bbox.unwrap().center();
            assert!((cx - truth.x).abs() <= 1.0 && (cy - truth.y).abs() <= 1.0);
        }
        assert_eq!(track.entries[7].status, TrackStatus::Measured);
    }

    #[test]
    fn long_gap_loses_the_track_and_reseeds() {
        let mut masks: Vec<_> = (0..14).map(|k| square_mask(120, 40, 5 + 6 * k, 20, k as usize)).collect();
        for m in masks.iter_mut().take(9).skip(3) {
            *m = empty(120, 40, m.frame_index);
        }
        let params = TrackerParams { max_gap: 2, ..TrackerParams::default() };
        let status: Vec<_> = track_sequence(&masks, &params).unwrap().entries.iter().map(|e| e.status).collect();
        use TrackStatus::*;
        assert_eq!(
            status,
            vec![Measured, Measured, Measured, Predicted, Predicted, Lost, Lost, Lost, Lost, Measured, Measured, Measured, Measured, Measured]
        );
    }

    #[test]
    fn gate_rejects_distant_clutter() {
        let mut masks: Vec<_> = (0..8).map(|k| square_mask(200, 40, 5 + 5 * k, 20, k as usize)).collect();
        // far-away big blob replaces the object in frame 5
        masks[5] = MaskPrediction {
            prob: Image::from_fn(200, 40, 1, |x, y, _| f64::from(u8::from((170..180).contains(&x) && (5..15).contains(&y)))),
            frame_index: 5,
        };
        let track = track_sequence(&masks, &TrackerParams::default()).unwrap();
        assert_eq!(track.entries[5].status, TrackStatus::Predicted);
    }

    #[test]
    fn empty_inputs() {
        assert!(track_sequence(&[], &TrackerParams::default()).unwrap().entries.is_empty());
        let masks: Vec<_> = (0..4).map(|k| empty(10, 10, k)).collect();
        let t = track_sequence(&masks, &TrackerParams::default()).unwrap();
        assert!(t.entries.iter().all(|e| e.status == TrackStatus::Lost));
    }

    #[test]
    fn jsonl_round_trip() {
        let masks: Vec<_> = (0..3).map(|k| square_mask(30, 30, 5 + 4 * k, 5, k as usize)).collect();
        let track = track_sequence(&masks, &TrackerParams::default()).unwrap();
        let mut buf = Vec::new();
        track.write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().next().unwrap().starts_with(r#"{"frame":0,"status":"measured","bbox":[4,4,3,3],"score":"#));
        let back = Track::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back.entries.len(), 3);
        assert_eq!(back.entries[1].bbox, track.entries[1].bbox);
    }
}
