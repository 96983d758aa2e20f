use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sequence_seed, DatasetConfig, DatasetError, SampleMeta, SequenceSample};
use crate::bbox::BBox;
use crate::renderer::io::{load_clip, load_template};
use crate::renderer::{
    make_gt_mask, procedural_clip, sliding_median, synthesize_frame, tint_and_resize, BallTemplate, Image, RenderParams,
};
use crate::segment::WINDOW;
use crate::synthgen::{generate_trajectory, rasterize_psf, ArenaConfig, PathPsf, TrajectoryConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    /// Ball diameter range, px.
    pub diameter: (f64, f64),
    /// Over-exposure factor range.
    pub b_f: (f64, f64),
    /// Ground truth keeps pixels above this fraction of the matte peak.
    pub gt_threshold: f64,
    /// Upper bound of the per-sequence defocus radius, px.
    pub defocus_max: f64,
    pub sensor_noise_sigma: f64,
    /// Chance of a table surface inside the arena.
    pub p_table: f64,
    /// Window start step.
    pub stride: usize,
    /// Required share of windows whose middle frame is an FMO.
    pub fmo_min_fraction: f64,
    pub max_retries: u32,
    /// Least max-channel difference between the ball color and the mean background.
    pub min_contrast: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            diameter: (5.0, 12.0),
            b_f: (0.8, 1.4),
            gt_threshold: 0.1,
            defocus_max: 0.0,
            sensor_noise_sigma: 0.0,
            p_table: 0.3,
            stride: 1,
            fmo_min_fraction: 0.9,
            max_retries: 50,
            min_contrast: 0.0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidConfig(m.to_string()));
        if !(self.diameter.0 >= 2.0 && self.diameter.0 <= self.diameter.1 && self.diameter.1.is_finite()) {
            return bad("diameter range must satisfy 2 <= min <= max");
        }
        if !(self.b_f.0 > 0.0 && self.b_f.0 <= self.b_f.1 && self.b_f.1.is_finite()) {
            return bad("b_f range must satisfy 0 < min <= max");
        }
        if !(self.gt_threshold > 0.0 && self.gt_threshold < 1.0) {
            return bad("gt_threshold must lie in (0, 1)");
        }
        if !(self.defocus_max >= 0.0 && self.sensor_noise_sigma >= 0.0) {
            return bad("defocus_max and sensor_noise_sigma must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.p_table) || !(0.0..=1.0).contains(&self.fmo_min_fraction) {
            return bad("p_table and fmo_min_fraction must lie in [0, 1]");
        }
        if self.stride == 0 || self.max_retries == 0 {
            return bad("stride and max_retries must be positive");
        }
        if !(0.0..1.0).contains(&self.min_contrast) {
            return bad("min_contrast must lie in [0, 1)");
        }
        Ok(())
    }
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [f64; 3] {
    let c = v * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [r + m, g + m, b + m]
}

fn mean_color(img: &Image) -> [f64; 3] {
    let mut acc = [0.0; 3];
    for px in img.data().chunks_exact(3) {
        for c in 0..3 {
            acc[c] += f64::from(px[c]);
        }
    }
    let n = (img.width() * img.height()) as f64;
    acc.map(|a| a / n)
}

struct Draw {
    diameter: f64,
    b_f: f64,
    color: [f64; 3],
    template: usize,
    defocus: f64,
    arena: ArenaConfig,
    trajectory_seed: u64,
    noise_seed: u64,
}

fn draw(rng: &mut ChaCha8Rng, cfg: &RenderConfig, n_templates: usize, background: [f64; 3], size: (u32, u32)) -> Result<Draw, DatasetError> {
    let (width, height) = size;
    let diameter = rng.random_range(cfg.diameter.0..=cfg.diameter.1);
    let b_f = rng.random_range(cfg.b_f.0..=cfg.b_f.1);
    let mut color = None;
    for _ in 0..100 {
        let c = hsv_to_rgb(rng.random_range(0.0..360.0), rng.random_range(0.0..0.7), rng.random_range(0.85..=1.0));
        let contrast = (0..3).map(|k| ((c[k] * b_f).min(1.0) - background[k]).abs()).fold(0.0, f64::max);
        if contrast >= cfg.min_contrast {
            color = Some(c);
            break;
        }
    }
    let color = color.ok_or(DatasetError::Contrast(cfg.min_contrast))?;
    let template = rng.random_range(0..n_templates);
    let defocus = if cfg.defocus_max > 0.0 { rng.random_range(0.0..=cfg.defocus_max) } else { 0.0 };

    let mut arena = ArenaConfig::with_inset(width, height, diameter / 2.0);
    if rng.random_bool(cfg.p_table) {
        let (w, h) = (f64::from(width), f64::from(height));
        let y = rng.random_range(0.55..0.85) * h;
        let len = rng.random_range(0.3..0.7) * w;
        let x0 = rng.random_range(0.0..(w - 1.0 - len));
        arena.add_table(y, x0, x0 + len);
    }
    Ok(Draw { diameter, b_f, color, template, defocus, arena, trajectory_seed: rng.next_u64(), noise_seed: rng.next_u64() })
}

fn window_starts(n_frames: usize, stride: usize) -> Vec<usize> {
    if n_frames < WINDOW {
        return Vec::new();
    }
    (0..=n_frames - WINDOW).step_by(stride).collect()
}

/// Renders one sequence over a background clip and cuts it into windows.
///
/// The clip is median-cleaned first, so `clip.len() - 4` frames carry the
/// object and `clip.len() - 8` windows come out at stride 1. Trajectories are
/// redrawn until enough windows show an FMO in their middle frame.
pub fn build_sequence(
    seed: u64,
    clip: &[Image],
    trajectory: &TrajectoryConfig,
    render: &RenderConfig,
    templates: &[BallTemplate],
) -> Result<Vec<SequenceSample>, DatasetError> {
    if clip.len() < 9 {
        return Err(DatasetError::ClipTooShort(clip.len()));
    }
    if templates.is_empty() {
        return Err(DatasetError::InvalidConfig("no ball templates".into()));
    }
    render.validate()?;
    let backgrounds = sliding_median(clip)?;
    let (height, width) = backgrounds[0].size();
    if render.diameter.1 >= f64::from(width.min(height)) / 2.0 {
        return Err(DatasetError::ArenaTooSmall { diameter: render.diameter.1, width, height });
    }
    let n = backgrounds.len();
    let traj_cfg = TrajectoryConfig { n_frames: n as u32, ..trajectory.clone() };
    traj_cfg.validate()?;
    let starts = window_starts(n, render.stride);
    let bg_mean = mean_color(&backgrounds[0]);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = 0.0f64;
    let mut accepted = None;
    for _ in 0..render.max_retries {
        let d = draw(&mut rng, render, templates.len(), bg_mean, (width, height))?;
        let mut traj = generate_trajectory(d.trajectory_seed, &traj_cfg, &d.arena)?;
        traj.label(d.diameter)?;
        let fmo = starts.iter().filter(|&&s| traj.is_fmo[s + WINDOW / 2]).count() as f64 / starts.len() as f64;
        if fmo >= render.fmo_min_fraction {
            accepted = Some((d, traj));
            break;
        }
        best = best.max(fmo);
    }
    let (d, traj) = accepted.ok_or(DatasetError::FmoCoverage { required: render.fmo_min_fraction, attempts: render.max_retries, best })?;

    let template = &templates[d.template];
    let sprite = tint_and_resize(&template.rgb, &template.alpha, d.color, d.diameter)?;
    let psfs: Vec<PathPsf> = (0..n).map(|t| rasterize_psf(&traj, t, (height, width))).collect::<Result<_, _>>()?;
    let frames: Vec<Image> = (0..n)
        .map(|t| {
            let params = RenderParams {
                b_f: d.b_f,
                defocus_radius: d.defocus,
                sensor_noise_sigma: render.sensor_noise_sigma,
                noise_seed: d.noise_seed.wrapping_add(t as u64),
            };
            synthesize_frame(&backgrounds[t], &sprite, &psfs[t], &params).map(|(img, _)| img)
        })
        .collect::<Result<_, _>>()?;

    starts
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let mid = s + WINDOW / 2;
            let gt = make_gt_mask(&psfs[mid], &sprite.m, render.gt_threshold, (height, width))?;
            let meta = SampleMeta {
                seed,
                sequence_index: 0,
                window_index: k,
                frame_indices: std::array::from_fn(|i| s + i),
                diameter_px: d.diameter,
                b_f: d.b_f,
                color: d.color,
                is_fmo: traj.is_fmo[mid],
                bbox: gt.bbox().map(BBox::from),
                events: traj.events_in(s..s + WINDOW),
                displacement_px: traj.displacement[mid],
            };
            Ok(SequenceSample { frames: frames[s..s + WINDOW].to_vec(), gt, meta })
        })
        .collect()
}

/// Ball templates from a directory of RGBA images, or one procedural ball.
pub fn load_templates(dir: Option<&Path>) -> Result<Vec<BallTemplate>, DatasetError> {
    let Some(dir) = dir else {
        return Ok(vec![BallTemplate::procedural(64)]);
    };
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| DatasetError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(DatasetError::InvalidConfig(format!("no PNG templates in {}", dir.display())));
    }
    paths.iter().map(|p| load_template(p).map_err(DatasetError::from)).collect()
}

fn clip_dirs(dir: &Path) -> Result<Vec<std::path::PathBuf>, DatasetError> {
    let mut dirs: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| DatasetError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(DatasetError::InvalidConfig(format!("no clip directories in {}", dir.display())));
    }
    Ok(dirs)
}

fn background_clip(config: &DatasetConfig, seed: u64, index: usize, dirs: &[std::path::PathBuf]) -> Result<Vec<Image>, DatasetError> {
    if dirs.is_empty() {
        let bg_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
        return Ok(procedural_clip(bg_seed, config.width, config.height, config.clip_frames, &config.background));
    }
    let dir = &dirs[index % dirs.len()];
    let clip = load_clip(dir)?;
    if let Some(f) = clip.iter().find(|f| f.size() != (config.height, config.width)) {
        return Err(DatasetError::InvalidConfig(format!(
            "{}: frames are {}x{}, config expects {}x{}",
            dir.display(),
            f.width(),
            f.height(),
            config.width,
            config.height
        )));
    }
    Ok(clip.into_iter().take(config.clip_frames).collect())
}

/// Builds every sequence on a pool of `jobs` threads; output order follows
/// sequence index regardless of scheduling.
pub fn generate_dataset(config: &DatasetConfig, master_seed: u64, jobs: usize) -> Result<Vec<SequenceSample>, DatasetError> {
    config.validate()?;
    let templates = load_templates(config.templates_dir.as_deref())?;
    let dirs = match &config.clips_dir {
        Some(d) => clip_dirs(d)?,
        None => Vec::new(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| DatasetError::InvalidConfig(e.to_string()))?;
    let per_sequence: Vec<Vec<SequenceSample>> = pool.install(|| {
        (0..config.n_sequences)
            .into_par_iter()
            .map(|i| {
                let seed = sequence_seed(master_seed, i);
                let run = || {
                    let clip = background_clip(config, seed, i, &dirs)?;
                    let mut samples = build_sequence(seed, &clip, &config.trajectory, &config.render, &templates)?;
                    for s in &mut samples {
                        s.meta.sequence_index = i;
                    }
                    Ok(samples)
                };
                run().map_err(|e| DatasetError::Sequence { sequence: i, source: Box::new(e) })
            })
            .collect::<Result<_, _>>()
    })?;
    Ok(per_sequence.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_clip(n: usize, w: u32, h: u32) -> Vec<Image> {
        procedural_clip(5, w, h, n, &Default::default())
    }

    fn templates() -> Vec<BallTemplate> {
        vec![BallTemplate::procedural(32)]
    }

    #[test]
    fn nine_frames_make_one_window() {
        let samples = build_sequence(11, &static_clip(9, 96, 64), &TrajectoryConfig::default(), &RenderConfig::default(), &templates()).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].meta.frame_indices, [0, 1, 2, 3, 4]);
        samples[0].validate().unwrap();
        assert_eq!(samples[0].stacked().len(), 96 * 64 * 15);
    }

    #[test]
    fn deterministic_per_seed() {
        let clip = static_clip(14, 120, 80);
        let a = build_sequence(3, &clip, &TrajectoryConfig::default(), &RenderConfig::default(), &templates()).unwrap();
        let b = build_sequence(3, &clip, &TrajectoryConfig::default(), &RenderConfig::default(), &templates()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        let c = build_sequence(4, &clip, &TrajectoryConfig::default(), &RenderConfig::default(), &templates()).unwrap();
        assert_ne!(a[0].frames, c[0].frames);
    }

    #[test]
    fn bbox_is_tight_box_of_gt() {
        let clip = static_clip(14, 120, 80);
        for seed in 0..5 {
            for s in build_sequence(seed, &clip, &TrajectoryConfig::default(), &RenderConfig::default(), &templates()).unwrap() {
                let (w, h) = (s.gt.mask.width(), s.gt.mask.height());
                let on: Vec<(u32, u32)> = (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| s.gt.mask.get(x, y, 0) > 0.0).collect();
                let scan = (!on.is_empty()).then(|| {
                    let x0 = on.iter().map(|p| p.0).min().unwrap();
                    let x1 = on.iter().map(|p| p.0).max().unwrap();
                    let y0 = on.iter().map(|p| p.1).min().unwrap();
                    let y1 = on.iter().map(|p| p.1).max().unwrap();
                    BBox::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1)
                });
                assert_eq!(s.meta.bbox, scan);
            }
        }
    }

    #[test]
    fn fmo_coverage_holds_with_defaults() {
        let cfg = DatasetConfig { n_sequences: 12, width: 160, height: 120, ..DatasetConfig::default() };
        let samples = generate_dataset(&cfg, 9, 4).unwrap();
        let fmo = samples.iter().filter(|s| s.meta.is_fmo).count() as f64 / samples.len() as f64;
        assert!(fmo >= 0.9, "{fmo}");
    }

    #[test]
    fn rejects_short_clips_and_tiny_arenas() {
        let r = build_sequence(1, &static_clip(8, 96, 64), &TrajectoryConfig::default(), &RenderConfig::default(), &templates());
        assert!(matches!(r, Err(DatasetError::ClipTooShort(8))));
        let big = RenderConfig { diameter: (30.0, 40.0), ..RenderConfig::default() };
        let r = build_sequence(1, &static_clip(9, 64, 64), &TrajectoryConfig::default(), &big, &templates());
        assert!(matches!(r, Err(DatasetError::ArenaTooSmall { .. })));
    }

    #[test]
    fn parallelism_does_not_change_output() {
        let cfg = DatasetConfig { n_sequences: 5, width: 96, height: 72, ..DatasetConfig::default() };
        assert_eq!(generate_dataset(&cfg, 21, 1).unwrap(), generate_dataset(&cfg, 21, 3).unwrap());
    }

    #[test]
    fn hsv_primaries() {
        assert_eq!(hsv_to_rgb(0.0, 1.0, 1.0), [1.0, 0.0, 0.0]);
        assert_eq!(hsv_to_rgb(120.0, 1.0, 1.0), [0.0, 1.0, 0.0]);
        assert_eq!(hsv_to_rgb(200.0, 0.0, 0.5), [0.5, 0.5, 0.5]);
    }
}
