//! Seeded synthetic sequences cut into 5-frame windows with middle-frame
//! ground truth, and their on-disk layout.

mod build;
mod store;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bbox::BBox;
use crate::renderer::{BackgroundStyle, GtMask, Image, RenderError};
use crate::segment::{stack_channels, WINDOW};
use crate::synthgen::{SynthError, TrajectoryConfig, TrajectoryEvent};

pub use build::{build_sequence, generate_dataset, load_templates, RenderConfig};
pub use store::{
    read_dataset, read_manifest, read_metas, sample_dir_name, sample_frame_path, sample_gt_path, write_dataset, MANIFEST_FILE,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("background clip has {0} frames, at least 9 are needed")]
    ClipTooShort(usize),
    #[error("sprite of diameter {diameter} px does not fit a {width}x{height} arena")]
    ArenaTooSmall { diameter: f64, width: u32, height: u32 },
    #[error("no trajectory reached the FMO fraction {required} in {attempts} attempts (best {best:.3})")]
    FmoCoverage { required: f64, attempts: u32, best: f64 },
    #[error("no foreground color reaches contrast {0} against the background")]
    Contrast(f64),
    #[error("invalid dataset configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid sample {name}: {reason}")]
    InvalidSample { name: String, reason: String },
    #[error("manifest config hash {stored} does not match its config ({computed})")]
    CorruptManifest { stored: String, computed: String },
    #[error("missing dataset files: {}", .0.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    MissingFiles(Vec<PathBuf>),
    #[error("sequence {sequence}: {source}")]
    Sequence { sequence: usize, source: Box<DatasetError> },
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl DatasetError {
    pub(crate) fn io(path: impl Into<PathBuf>, e: impl std::fmt::Display) -> Self {
        Self::Io { path: path.into(), message: e.to_string() }
    }
}

/// Everything needed to regenerate a dataset from its master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_sequences: usize,
    pub width: u32,
    pub height: u32,
    /// Raw clip length; the median preprocessing consumes 4 frames.
    pub clip_frames: usize,
    /// Fraction of sequences assigned to validation.
    pub val_fraction: f64,
    /// Directory of clip subdirectories with frame images; procedural
    /// backgrounds are used when unset.
    pub clips_dir: Option<PathBuf>,
    /// RGBA ball images; a procedural white ball when unset.
    pub templates_dir: Option<PathBuf>,
    pub background: BackgroundStyle,
    pub trajectory: TrajectoryConfig,
    pub render: RenderConfig,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            n_sequences: 8,
            width: 320,
            height: 240,
            clip_frames: 14,
            val_fraction: 0.2,
            clips_dir: None,
            templates_dir: None,
            background: BackgroundStyle::default(),
            trajectory: TrajectoryConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::InvalidConfig(m));
        if self.clip_frames < 9 {
            return bad(format!("clip_frames must be at least 9, got {}", self.clip_frames));
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!("frames must be at least 16x16, got {}x{}", self.width, self.height));
        }
        if !(0.0..=1.0).contains(&self.val_fraction) {
            return bad(format!("val_fraction must lie in [0, 1], got {}", self.val_fraction));
        }
        self.trajectory.validate()?;
        self.render.validate()
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

fn hash_u64(tag: &[u8], master_seed: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(tag);
    h.update(master_seed.to_le_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

/// Seed of sequence `index`, stable across runs and generation order.
pub fn sequence_seed(master_seed: u64, index: usize) -> u64 {
    hash_u64(b"fmo-sequence", master_seed, index as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

pub fn split_of(master_seed: u64, index: usize, val_fraction: f64) -> Split {
    let u = hash_u64(b"fmo-split", master_seed, index as u64) as f64 / 2f64.powi(64);
    if u < val_fraction {
        Split::Val
    } else {
        Split::Train
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub seed: u64,
    pub sequence_index: usize,
    pub window_index: usize,
    /// Trajectory frame of each window frame.
    pub frame_indices: [usize; WINDOW],
    pub diameter_px: f64,
    pub b_f: f64,
    pub color: [f64; 3],
    /// FMO flag of the middle frame.
    pub is_fmo: bool,
    /// Tight box of the ground-truth mask.
    pub bbox: Option<BBox>,
    pub events: Vec<TrajectoryEvent>,
    /// Middle-frame displacement during the exposure, px.
    pub displacement_px: f64,
}

impl SampleMeta {
    pub fn middle_frame(&self) -> usize {
        self.frame_indices[WINDOW / 2]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSample {
    pub frames: Vec<Image>,
    pub gt: GtMask,
    pub meta: SampleMeta,
}

impl SequenceSample {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let fail = |reason: &str| {
            Err(DatasetError::InvalidSample { name: sample_dir_name(&self.meta), reason: reason.to_string() })
        };
        if self.frames.len() != WINDOW {
            return fail("expected 5 frames");
        }
        let first = &self.frames[0];
        if first.channels() != 3 || self.frames.iter().any(|f| !f.same_shape(first)) {
            return fail("frames must be equal-size RGB");
        }
        if self.gt.mask.channels() != 1 || self.gt.mask.size() != first.size() {
            return fail("ground truth size differs from the frames");
        }
        if self.gt.mask.data().iter().any(|&v| v != 0.0 && v != 1.0) {
            return fail("ground truth is not binary");
        }
        if self.gt.bbox().map(BBox::from) != self.meta.bbox {
            return fail("bbox is not the tight box of the ground truth");
        }
        if self.gt.frame_index != self.meta.middle_frame() {
            return fail("ground truth frame is not the middle frame");
        }
        Ok(())
    }

    /// 15-channel row-major, channel-minor view of the window.
    pub fn stacked(&self) -> Vec<f32> {
        stack_channels(&self.frames).expect("validated window")
    }
}

/// Summary written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub master_seed: u64,
    pub config: DatasetConfig,
    pub config_hash: String,
    pub n_sequences: usize,
    pub n_samples: usize,
    pub sequence_seeds: Vec<u64>,
    pub splits: Splits,
    /// Sample directory names in sequence, then window order.
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
}

impl DatasetManifest {
    pub fn new(master_seed: u64, config: &DatasetConfig, samples: &[SequenceSample]) -> Self {
        let n = config.n_sequences;
        let mut splits = Splits::default();
        for i in 0..n {
            match split_of(master_seed, i, config.val_fraction) {
                Split::Train => splits.train.push(i),
                Split::Val => splits.val.push(i),
            }
        }
        Self {
            master_seed,
            config: config.clone(),
            config_hash: config.hash(),
            n_sequences: n,
            n_samples: samples.len(),
            sequence_seeds: (0..n).map(|i| sequence_seed(master_seed, i)).collect(),
            splits,
            samples: samples.iter().map(|s| sample_dir_name(&s.meta)).collect(),
        }
    }

    pub fn fmo_fraction(samples: &[SequenceSample]) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        samples.iter().filter(|s| s.meta.is_fmo).count() as f64 / samples.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable_and_distinct() {
        assert_eq!(sequence_seed(42, 3), sequence_seed(42, 3));
        assert_ne!(sequence_seed(42, 3), sequence_seed(42, 4));
        assert_ne!(sequence_seed(42, 3), sequence_seed(43, 3));
    }

    #[test]
    fn split_depends_only_on_seed_and_index() {
        let a: Vec<Split> = (0..200).map(|i| split_of(7, i, 0.25)).collect();
        let b: Vec<Split> = (0..200).rev().map(|i| split_of(7, i, 0.25)).rev().collect();
        assert_eq!(a, b);
        let val = a.iter().filter(|s| **s == Split::Val).count();
        assert!((25..=75).contains(&val), "{val}");
        assert!((0..50).all(|i| split_of(7, i, 0.0) == Split::Train));
        assert!((0..50).all(|i| split_of(7, i, 1.0) == Split::Val));
    }

    #[test]
    fn config_rejects_short_clips_and_unknown_keys() {
        let cfg = DatasetConfig { clip_frames: 8, ..DatasetConfig::default() };
        assert!(matches!(cfg.validate(), Err(DatasetError::InvalidConfig(_))));
        assert!(serde_json::from_str::<DatasetConfig>(r#"{"n_sequence": 3}"#).is_err());
        let cfg = DatasetConfig::default();
        let back: DatasetConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }
}
