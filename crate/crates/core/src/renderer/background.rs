use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Image, RenderError};

/// Per-pixel, per-channel median of exactly five equally sized frames.
pub fn median_background(frames: &[Image]) -> Result<Image, RenderError> {
    if frames.len() != 5 {
        return Err(RenderError::FrameCount { expected: 5, actual: frames.len() });
    }
    if frames.iter().any(|f| !f.same_shape(&frames[0])) {
        return Err(RenderError::SizeMismatch);
    }
    let first = &frames[0];
    let mut data = Vec::with_capacity(first.data().len());
    for i in 0..first.data().len() {
        let mut v = [0f32; 5];
        for (k, f) in frames.iter().enumerate() {
            v[k] = f.data()[i];
        }
        v.sort_unstable_by(f32::total_cmp);
        data.push(v[2]);
    }
    Image::from_vec(first.width(), first.height(), first.channels(), data)
}

/// Median-of-5 over a sliding window; `clip.len() - 4` frames out.
pub fn sliding_median(clip: &[Image]) -> Result<Vec<Image>, RenderError> {
    if clip.len() < 5 {
        return Err(RenderError::FrameCount { expected: 5, actual: clip.len() });
    }
    clip.windows(5).map(median_background).collect()
}

/// Synthetic stand-in for a real background clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackgroundStyle {
    /// Range of the mean brightness.
    pub brightness: (f64, f64),
    /// Amplitude of the low-frequency pattern.
    pub texture: f64,
    /// Per-frame i.i.d. noise amplitude (0 for a perfectly static clip).
    pub frame_noise: f64,
}

impl Default for BackgroundStyle {
    fn default() -> Self {
        Self { brightness: (0.1, 0.4), texture: 0.08, frame_noise: 0.0 }
    }
}

/// Smooth colored gradient with a few soft blobs, repeated `n_frames` times.
pub fn procedural_clip(seed: u64, width: u32, height: u32, n_frames: usize, style: &BackgroundStyle) -> Vec<Image> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: [f64; 3] = std::array::from_fn(|_| rng.random_range(style.brightness.0..=style.brightness.1));
    let grad: [f64; 2] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
    let blobs: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.0..f64::from(width)),
                rng.random_range(0.0..f64::from(height)),
                rng.random_range(0.1..0.35) * f64::from(width.min(height)),
                rng.random_range(-1.0..1.0),
            )
        })
        .collect();
    let (w, h) = (f64::from(width), f64::from(height));
    let still = Image::from_fn(width, height, 3, |x, y, c| {
        let (fx, fy) = (f64::from(x) / w - 0.5, f64::from(y) / h - 0.5);
        let mut v = base[c as usize] + style.texture * (grad[0] * fx + grad[1] * fy);
        for &(bx, by, r, a) in &blobs {
            let d2 = ((f64::from(x) - bx).powi(2) + (f64::from(y) - by).powi(2)) / (r * r);
            v += style.texture * a * (-d2).exp();
        }
        v
    });
    (0..n_frames)
        .map(|_| {
            if style.frame_noise > 0.0 {
                still.map(|v| f64::from(v) + rng.random_range(-style.frame_noise..=style.frame_noise))
            } else {
                still.clone()
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transient_value_is_removed() {
        let frames: Vec<Image> = [0.1, 0.1, 0.9, 0.1, 0.1].iter().map(|&v| Image::filled(3, 2, 3, v)).collect();
        let m = median_background(&frames).unwrap();
        assert!(m.data().iter().all(|&v| v == 0.1f32));
    }

    #[test]
    fn identical_frames_are_a_fixed_point() {
        let f = Image::from_fn(7, 5, 3, |x, y, c| f64::from(x * 3 + y + c) / 40.0);
        let m = median_background(&vec![f.clone(); 5]).unwrap();
        assert_eq!(m, f);
    }

    #[test]
    fn matches_sort_oracle_on_random_stack() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let frames: Vec<Image> = (0..5).map(|_| Image::from_fn(9, 6, 3, |_, _, _| rng.random::<f64>())).collect();
        let m = median_background(&frames).unwrap();
        for y in 0..6 {
            for x in 0..9 {
                for c in 0..3 {
                    let mut v: Vec<f32> = frames.iter().map(|f| f.get(x, y, c)).collect();
                    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    assert_eq!(m.get(x, y, c), v[2]);
                }
            }
        }
    }

    #[test]
    fn rejects_short_or_mismatched_stacks() {
        let f = Image::zeros(4, 4, 3);
        assert!(matches!(median_background(&vec![f.clone(); 4]), Err(RenderError::FrameCount { .. })));
        let mut v = vec![f.clone(); 5];
        v[3] = Image::zeros(5, 4, 3);
        assert!(matches!(median_background(&v), Err(RenderError::SizeMismatch)));
        assert_eq!(sliding_median(&vec![f; 9]).unwrap().len(), 5);
    }

    #[test]
    fn procedural_clip_is_static_and_seeded() {
        let a = procedural_clip(4, 40, 30, 3, &BackgroundStyle::default());
        assert_eq!(a[0], a[2]);
        assert_eq!(a, procedural_clip(4, 40, 30, 3, &BackgroundStyle::default()));
    }
}
