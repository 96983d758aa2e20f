//! Run configuration shared by every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::DatasetConfig;
use crate::segment::SegmenterSpec;
use crate::tracker::TrackerParams;

/// Which detections the evaluation scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalSource {
    /// One tracker box per frame, scored against the ground-truth box.
    Track,
    /// The whole binarized mask as one region, scored against the ground-truth mask.
    Masks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalParams {
    pub iou_threshold: f64,
    pub source: EvalSource,
    /// Count boxes the tracker only predicted as detections.
    pub include_predicted: bool,
    /// Mask probability above which a pixel is foreground (mask source).
    pub mask_threshold: f64,
}

impl Default for EvalParams {
    fn default() -> Self {
        Self { iou_threshold: 0.5, source: EvalSource::Track, include_predicted: true, mask_threshold: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub dataset: PathBuf,
    pub masks: PathBuf,
    pub tracks: PathBuf,
    pub report: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            dataset: "out/dataset".into(),
            masks: "out/masks".into(),
            tracks: "out/tracks".into(),
            report: "out/report".into(),
        }
    }
}

impl Paths {
    /// All four directories under `root`.
    pub fn under(root: &Path) -> Self {
        Self { dataset: root.join("dataset"), masks: root.join("masks"), tracks: root.join("tracks"), report: root.join("report") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// `(height, width)` pairs.
    pub resolutions: Vec<(u32, u32)>,
    pub runs: usize,
    /// Raw frames per benchmark clip; windows = frames - 8.
    pub clip_frames: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self { resolutions: vec![(864, 1536), (576, 1024), (430, 768), (324, 576), (216, 384)], runs: 3, clip_frames: 13 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Worker threads for sequence-parallel stages.
    pub jobs: usize,
    pub generate: DatasetConfig,
    pub segmenter: SegmenterSpec,
    pub tracker: TrackerParams,
    pub metrics: EvalParams,
    pub paths: Paths,
    pub bench: BenchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 42,
            jobs: 1,
            generate: DatasetConfig::default(),
            segmenter: SegmenterSpec::default(),
            tracker: TrackerParams::default(),
            metrics: EvalParams::default(),
            paths: Paths::default(),
            bench: BenchConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |e: &dyn std::fmt::Display| ConfigError(e.to_string());
        if self.jobs == 0 {
            return Err(ConfigError("jobs must be at least 1".into()));
        }
        self.generate.validate().map_err(|e| err(&e))?;
        self.segmenter.validate().map_err(|e| err(&e))?;
        self.tracker.validate().map_err(|e| err(&e))?;
        let m = &self.metrics;
        if !(m.iou_threshold > 0.0 && m.iou_threshold < 1.0) || !(0.0..1.0).contains(&m.mask_threshold) {
            return Err(ConfigError("iou_threshold must lie in (0, 1) and mask_threshold in [0, 1)".into()));
        }
        if self.bench.runs < 3 {
            return Err(ConfigError(format!("bench.runs must be at least 3, got {}", self.bench.runs)));
        }
        if self.bench.clip_frames < 9 || self.bench.resolutions.iter().any(|&(h, w)| h < 16 || w < 16) {
            return Err(ConfigError("bench needs clip_frames >= 9 and resolutions of at least 16x16".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segment::ExternalParams;

    #[test]
    fn round_trip() {
        let mut cfg = RunConfig::default();
        cfg.segmenter = SegmenterSpec::External(ExternalParams::new("plugin --model m.bin"));
        cfg.metrics.source = EvalSource::Masks;
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(RunConfig::from_json("{}").unwrap(), RunConfig::default());
    }

    #[test]
    fn rejects_typos_and_bad_values() {
        assert!(RunConfig::from_json(r#"{"master_sed": 1}"#).is_err());
        assert!(RunConfig::from_json(r#"{"tracker": {"max_gapp": 2}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"segmenter": {"kind": "baseline", "tau": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"generate": {"clip_frames": 8}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"bench": {"runs": 2}}"#).is_err());
        let ext = RunConfig::from_json(r#"{"segmenter": {"kind": "external", "command": "x"}}"#).unwrap();
        assert_eq!(ext.segmenter, SegmenterSpec::External(ExternalParams::new("x")));
    }
}
