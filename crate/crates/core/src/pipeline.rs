//! Stage runners: generate, segment, track, eval and bench.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{EvalParams, EvalSource, RunConfig};
use crate::dataset::{
    build_sequence, generate_dataset, load_templates, read_metas, sample_dir_name, sample_frame_path, sample_gt_path, write_dataset,
    DatasetConfig, DatasetError, DatasetManifest, SampleMeta,
};
use crate::metrics::{match_frame, Counts, MetricsError, PixelSet, Report, ReportRow};
use crate::renderer::io::{load_gray, load_rgb, save_png};
use crate::renderer::{procedural_clip, Image, RenderError};
use crate::segment::{MaskPrediction, SegmentError, SegmenterSpec};
use crate::tracker::{track_sequence, Track, TrackError, TrackStatus};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Data(String),
    #[error("segmenter protocol: {0}")]
    Protocol(String),
}

impl PipelineError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 1,
            Self::Data(_) => 2,
            Self::Protocol(_) => 3,
        }
    }
}

impl From<DatasetError> for PipelineError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::InvalidConfig(m) => Self::Config(m),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<SegmentError> for PipelineError {
    fn from(e: SegmentError) -> Self {
        match e {
            SegmentError::External { .. } => Self::Protocol(e.to_string()),
            SegmentError::InvalidParams(m) => Self::Config(m),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<RenderError> for PipelineError {
    fn from(e: RenderError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<TrackError> for PipelineError {
    fn from(e: TrackError) -> Self {
        match e {
            TrackError::InvalidParams(m) => Self::Config(m),
            e => Self::Data(e.to_string()),
        }
    }
}

impl From<MetricsError> for PipelineError {
    fn from(e: MetricsError) -> Self {
        Self::Data(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Data(format!("{}: {e}", path.display()))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, PipelineError> {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().map_err(|e| PipelineError::Config(e.to_string()))
}

/// Samples grouped by sequence, windows in order.
fn by_sequence(metas: Vec<SampleMeta>) -> Vec<(usize, Vec<SampleMeta>)> {
    let mut groups: BTreeMap<usize, Vec<SampleMeta>> = BTreeMap::new();
    for m in metas {
        groups.entry(m.sequence_index).or_default().push(m);
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|m| m.window_index);
            (k, v)
        })
        .collect()
}

pub fn sequence_name(index: usize) -> String {
    format!("seq_{index:05}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateSummary {
    pub n_sequences: usize,
    pub n_samples: usize,
    pub fmo_fraction: f64,
    pub config_hash: String,
}

pub fn run_generate(cfg: &RunConfig) -> Result<GenerateSummary, PipelineError> {
    let samples = generate_dataset(&cfg.generate, cfg.master_seed, cfg.jobs)?;
    let manifest = DatasetManifest::new(cfg.master_seed, &cfg.generate, &samples);
    if cfg.paths.dataset.exists() {
        fs::remove_dir_all(&cfg.paths.dataset).map_err(|e| io_err(&cfg.paths.dataset, e))?;
    }
    write_dataset(&samples, &manifest, &cfg.paths.dataset)?;
    Ok(GenerateSummary {
        n_sequences: manifest.n_sequences,
        n_samples: manifest.n_samples,
        fmo_fraction: DatasetManifest::fmo_fraction(&samples),
        config_hash: manifest.config_hash,
    })
}

fn mask_path(dir: &Path, meta: &SampleMeta) -> PathBuf {
    dir.join(format!("{}.png", sample_dir_name(meta)))
}

fn load_window(root: &Path, meta: &SampleMeta) -> Result<Vec<Image>, PipelineError> {
    (0..5).map(|k| load_rgb(&sample_frame_path(root, meta, k)).map_err(PipelineError::from)).collect()
}

/// Segments every window of the dataset into `paths.masks`, one 8-bit PNG per window.
pub fn run_segment(cfg: &RunConfig) -> Result<usize, PipelineError> {
    let (metas, _) = read_metas(&cfg.paths.dataset)?;
    let out = &cfg.paths.masks;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let groups = by_sequence(metas);
    let root = &cfg.paths.dataset;
    let counts: Vec<usize> = pool(cfg.jobs)?.install(|| {
        groups
            .par_iter()
            .map(|(_, metas)| {
                let mut segmenter = cfg.segmenter.build()?;
                for meta in metas {
                    let frames = load_window(root, meta)?;
                    let pred = segmenter.segment(&frames, meta.middle_frame())?;
                    save_png(&pred.prob, &mask_path(out, meta))?;
                }
                Ok(metas.len())
            })
            .collect::<Result<Vec<_>, PipelineError>>()
    })?;
    Ok(counts.iter().sum())
}

fn load_masks(dir: &Path, metas: &[SampleMeta]) -> Result<Vec<MaskPrediction>, PipelineError> {
    let missing: Vec<String> = metas.iter().map(|m| mask_path(dir, m)).filter(|p| !p.is_file()).map(|p| p.display().to_string()).collect();
    if !missing.is_empty() {
        return Err(PipelineError::Data(format!("missing masks: {}", missing.join(", "))));
    }
    metas
        .iter()
        .map(|m| Ok(MaskPrediction { prob: load_gray(&mask_path(dir, m))?, frame_index: m.middle_frame() }))
        .collect()
}

/// Tracks each sequence's masks into `paths.tracks/seq_NNNNN.jsonl`.
pub fn run_track(cfg: &RunConfig) -> Result<usize, PipelineError> {
    let (metas, _) = read_metas(&cfg.paths.dataset)?;
    let out = &cfg.paths.tracks;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let groups = by_sequence(metas);
    pool(cfg.jobs)?.install(|| {
        groups.par_iter().try_for_each(|(seq, metas)| {
            let masks = load_masks(&cfg.paths.masks, metas)?;
            let track = track_sequence(&masks, &cfg.tracker)?;
            let path = out.join(format!("{}.jsonl", sequence_name(*seq)));
            let mut buf = Vec::new();
            track.write_jsonl(&mut buf).map_err(|e| io_err(&path, e))?;
            fs::write(&path, buf).map_err(|e| io_err(&path, e))
        })
    })?;
    Ok(groups.len())
}

/// Per-frame detection regions from a track.
pub fn track_detections(track: &Track, width: u32, height: u32, include_predicted: bool) -> Result<Vec<Vec<PixelSet>>, PipelineError> {
    track
        .entries
        .iter()
        .map(|e| {
            let keep = match e.status {
                TrackStatus::Measured => true,
                TrackStatus::Predicted => include_predicted,
                TrackStatus::Lost => false,
            };
            match e.bbox {
                Some(b) if keep => Ok(vec![PixelSet::from_bbox(b, width, height)?]),
                _ => Ok(Vec::new()),
            }
        })
        .collect()
}

/// Per-frame detection regions from masks: the whole binarized mask.
pub fn mask_detections(masks: &[MaskPrediction], threshold: f64) -> Vec<Vec<PixelSet>> {
    masks.iter().map(|m| vec![PixelSet::from_mask(&m.prob, threshold)]).collect()
}

/// Ground-truth regions of one frame for the given detection source.
pub fn gt_regions(gt: &Image, source: EvalSource) -> Result<Vec<PixelSet>, PipelineError> {
    let mask = PixelSet::from_mask(gt, 0.0);
    Ok(match (source, mask.bbox()) {
        (_, None) => Vec::new(),
        (EvalSource::Masks, Some(_)) => vec![mask],
        (EvalSource::Track, Some(b)) => vec![PixelSet::from_bbox(b, gt.width(), gt.height())?],
    })
}

/// Summed counts over a sequence's frames.
pub fn evaluate_frames(detections: &[Vec<PixelSet>], ground_truth: &[Vec<PixelSet>], threshold: f64) -> Result<Counts, PipelineError> {
    if detections.len() != ground_truth.len() {
        return Err(PipelineError::Data(format!("{} detection frames vs {} ground-truth frames", detections.len(), ground_truth.len())));
    }
    detections.iter().zip(ground_truth).map(|(d, g)| match_frame(d, g, threshold).map_err(PipelineError::from)).sum()
}

fn eval_sequence(cfg: &RunConfig, seq: usize, metas: &[SampleMeta], params: &EvalParams) -> Result<ReportRow, PipelineError> {
    let gts: Vec<Image> = metas.iter().map(|m| load_gray(&sample_gt_path(&cfg.paths.dataset, m))).collect::<Result<_, _>>()?;
    let (width, height) = (gts[0].width(), gts[0].height());
    let ground_truth = gts.iter().map(|g| gt_regions(g, params.source)).collect::<Result<Vec<_>, _>>()?;
    let detections = match params.source {
        EvalSource::Track => {
            let path = cfg.paths.tracks.join(format!("{}.jsonl", sequence_name(seq)));
            let file = fs::File::open(&path).map_err(|e| io_err(&path, e))?;
            let track = Track::read_jsonl(std::io::BufReader::new(file))?;
            track_detections(&track, width, height, params.include_predicted)?
        }
        EvalSource::Masks => mask_detections(&load_masks(&cfg.paths.masks, metas)?, params.mask_threshold),
    };
    let counts = evaluate_frames(&detections, &ground_truth, params.iou_threshold)?;
    Ok(ReportRow { name: sequence_name(seq), n: metas.len(), counts })
}

/// Scores every sequence and writes `report.txt` and `report.csv`.
pub fn run_eval(cfg: &RunConfig) -> Result<Report, PipelineError> {
    let (metas, _) = read_metas(&cfg.paths.dataset)?;
    let groups = by_sequence(metas);
    let rows = pool(cfg.jobs)?.install(|| {
        groups.par_iter().map(|(seq, metas)| eval_sequence(cfg, *seq, metas, &cfg.metrics)).collect::<Result<Vec<_>, _>>()
    })?;
    let report = Report::new(rows)?;
    let out = &cfg.paths.report;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    fs::write(out.join("report.txt"), report.to_text()).map_err(|e| io_err(out, e))?;
    fs::write(out.join("report.csv"), report.to_csv()).map_err(|e| io_err(out, e))?;
    Ok(report)
}

/// generate → segment → track → eval.
pub fn run_all(cfg: &RunConfig) -> Result<Report, PipelineError> {
    run_generate(cfg)?;
    run_segment(cfg)?;
    run_track(cfg)?;
    run_eval(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub height: u32,
    pub width: u32,
    /// Median over runs of windows per second through segmenter and tracker.
    pub fps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub hardware: String,
    pub segmenter: String,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn to_text(&self) -> String {
        let mut s = format!("hardware: {}\nsegmenter: {}\n\n", self.hardware, self.segmenter);
        s.push_str(&format!("{:<13}  {:>8}\n", "resolution", "fps"));
        for r in &self.rows {
            s.push_str(&format!("{:<13}  {:>8.1}\n", format!("{} x {}", r.height, r.width), r.fps));
        }
        s
    }

    /// Rows sorted by area are non-increasing in fps.
    pub fn is_monotone(&self) -> bool {
        let mut rows = self.rows.clone();
        rows.sort_by_key(|r| u64::from(r.height) * u64::from(r.width));
        rows.windows(2).all(|w| w[1].fps <= w[0].fps)
    }
}

pub fn hardware_label() -> String {
    let cpu = fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|t| t.lines().find(|l| l.starts_with("model name")).and_then(|l| l.split(':').nth(1)).map(|s| s.trim().to_string()))
        .unwrap_or_else(|| std::env::consts::ARCH.to_string());
    let threads = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    format!("{cpu}, {threads} hardware threads, {} {}", std::env::consts::OS, std::env::consts::ARCH)
}

fn segmenter_label(spec: &SegmenterSpec) -> String {
    match spec {
        SegmenterSpec::Baseline(p) => format!("baseline (tau {}, morph_radius {}, min_area {})", p.tau, p.morph_radius, p.min_area),
        SegmenterSpec::External(p) => format!("external ({})", p.command),
    }
}

/// Wall-clock throughput of segmentation plus tracking per resolution,
/// single-threaded, over a freshly rendered sequence.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport, PipelineError> {
    let templates = load_templates(cfg.generate.templates_dir.as_deref())?;
    let mut rows = Vec::new();
    for &(height, width) in &cfg.bench.resolutions {
        let gen = DatasetConfig { width, height, clip_frames: cfg.bench.clip_frames, ..cfg.generate.clone() };
        let clip = procedural_clip(cfg.master_seed, width, height, gen.clip_frames, &gen.background);
        let samples = build_sequence(cfg.master_seed, &clip, &gen.trajectory, &gen.render, &templates)?;
        let mut times = Vec::with_capacity(cfg.bench.runs);
        for _ in 0..cfg.bench.runs {
            let mut segmenter = cfg.segmenter.build()?;
            let start = Instant::now();
            let masks = samples
                .iter()
                .map(|s| segmenter.segment(&s.frames, s.meta.middle_frame()))
                .collect::<Result<Vec<_>, _>>()?;
            track_sequence(&masks, &cfg.tracker)?;
            times.push(start.elapsed().as_secs_f64());
        }
        times.sort_by(f64::total_cmp);
        let median = times[times.len() / 2];
        rows.push(BenchRow { height, width, fps: samples.len() as f64 / median });
    }
    Ok(BenchReport { hardware: hardware_label(), segmenter: segmenter_label(&cfg.segmenter), rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Paths;

    fn small_config(root: &Path) -> RunConfig {
        let mut cfg = RunConfig::default();
        cfg.generate.n_sequences = 3;
        cfg.generate.width = 128;
        cfg.generate.height = 96;
        cfg.generate.clip_frames = 14;
        cfg.paths = Paths::under(root);
        cfg
    }

    #[test]
    fn stages_chain_and_are_rerunnable() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        let summary = run_generate(&cfg).unwrap();
        assert_eq!(summary.n_samples, 18);
        assert_eq!(run_segment(&cfg).unwrap(), 18);
        assert_eq!(run_track(&cfg).unwrap(), 3);
        let a = run_eval(&cfg).unwrap();
        assert_eq!(a.rows.len(), 3);
        assert_eq!(a.total().n, 18);
        let b = run_all(&cfg).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        assert!(dir.path().join("report/report.csv").is_file());
    }

    #[test]
    fn missing_masks_are_listed() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_config(dir.path());
        run_generate(&cfg).unwrap();
        match run_track(&cfg) {
            Err(PipelineError::Data(m)) => assert!(m.contains("seq_00000_win_000.png")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gt_regions_follow_source() {
        let mut gt = Image::zeros(10, 10, 1);
        gt.set(2, 2, 0, 1.0);
        gt.set(4, 3, 0, 1.0);
        assert_eq!(gt_regions(&gt, EvalSource::Masks).unwrap()[0].len(), 2);
        assert_eq!(gt_regions(&gt, EvalSource::Track).unwrap()[0].len(), 6);
        assert!(gt_regions(&Image::zeros(4, 4, 1), EvalSource::Track).unwrap().is_empty());
    }

    #[test]
    fn bench_table_lists_every_resolution() {
        let mut cfg = RunConfig::default();
        cfg.bench.resolutions = vec![(96, 128), (48, 64)];
        cfg.bench.clip_frames = 10;
        let r = run_bench(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!(r.rows.iter().all(|row| row.fps > 0.0));
        let text = r.to_text();
        assert!(text.contains("96 x 128") && text.contains("hardware: "));
    }
}
