use super::{Image, RenderError};
use crate::synthgen::PathPsf;

/// Binary ground-truth mask of the middle frame of a window.
#[derive(Debug, Clone, PartialEq)]
pub struct GtMask {
    /// Single channel, values in `{0, 1}`.
    pub mask: Image,
    pub frame_index: usize,
}

impl GtMask {
    pub fn is_empty(&self) -> bool {
        self.mask.count_nonzero() == 0
    }

    pub fn bbox(&self) -> Option<[u32; 4]> {
        self.mask.nonzero_bbox()
    }
}

/// Thresholds `[P_mid * M]` at `threshold` times its peak.
pub fn make_gt_mask(psf_mid: &PathPsf, m: &Image, threshold: f64, size: (u32, u32)) -> Result<GtMask, RenderError> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(RenderError::InvalidParams(format!("GT threshold must lie in (0, 1), got {threshold}")));
    }
    if m.channels() != 1 {
        return Err(RenderError::Channels { expected: 1, actual: m.channels() });
    }
    let (height, width) = size;
    let mut mask = Image::zeros(width, height, 1);
    if psf_mid.is_empty() {
        return Ok(GtMask { mask, frame_index: psf_mid.frame_index });
    }
    let dummy_f = Image::zeros(m.width(), m.height(), 3);
    let sprite = super::ForegroundSprite { f: dummy_f, m: m.clone(), diameter: f64::from(m.width()) };
    let splat = super::splat_sprite(&sprite, psf_mid, 1.0, size)?;
    let peak = splat.alpha.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        let cut = threshold * peak;
        for y in 0..height {
            for x in 0..width {
                if splat.alpha[(y * width + x) as usize] > cut {
                    mask.set(x, y, 0, 1.0);
                }
            }
        }
    }
    Ok(GtMask { mask, frame_index: psf_mid.frame_index })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::PsfEntry;

    fn disc(d: u32) -> Image {
        let r = f64::from(d) / 2.0;
        Image::from_fn(d, d, 1, |x, y, _| {
            let (dx, dy) = (f64::from(x) + 0.5 - r, f64::from(y) + 0.5 - r);
            f64::from(u8::from(dx * dx + dy * dy <= r * r))
        })
    }

    #[test]
    fn delta_gives_the_disc() {
        let m = disc(7);
        let psf = PathPsf { frame_index: 2, entries: vec![PsfEntry { x: 10, y: 8, weight: 1.0 }] };
        let gt = make_gt_mask(&psf, &m, 0.1, (20, 30)).unwrap();
        assert_eq!(gt.frame_index, 2);
        let expected = Image::from_fn(30, 20, 1, |x, y, _| {
            let (sx, sy) = (i64::from(x) - 10 + 3, i64::from(y) - 8 + 3);
            if (0..7).contains(&sx) && (0..7).contains(&sy) { f64::from(m.get(sx as u32, sy as u32, 0)) } else { 0.0 }
        });
        assert_eq!(gt.mask, expected);
    }

    #[test]
    fn horizontal_streak_is_a_capsule_matching_dense_convolution() {
        let m = disc(5);
        let entries: Vec<PsfEntry> = (10..=20).map(|x| PsfEntry { x, y: 10, weight: 1.0 / 11.0 }).collect();
        let psf = PathPsf { frame_index: 0, entries };
        let gt = make_gt_mask(&psf, &m, 0.1, (24, 40)).unwrap();

        // dense 2-D convolution oracle over every output pixel
        let mut dense = vec![0.0f64; 24 * 40];
        for y in 0..24i64 {
            for x in 0..40i64 {
                let mut acc = 0.0;
                for py in 0..24i64 {
                    for px in 0..40i64 {
                        let w = if py == 10 && (10..=20).contains(&px) { 1.0 / 11.0 } else { 0.0 };
                        let (sx, sy) = (x - px + 2, y - py + 2);
                        if w > 0.0 && (0..5).contains(&sx) && (0..5).contains(&sy) {
                            acc += w * f64::from(m.get(sx as u32, sy as u32, 0));
                        }
                    }
                }
                dense[(y * 40 + x) as usize] = acc;
            }
        }
        let peak = dense.iter().copied().fold(0.0, f64::max);
        let oracle_count = dense.iter().filter(|&&v| v > 0.1 * peak).count();
        let got = gt.mask.count_nonzero();
        assert!((got as f64 - oracle_count as f64).abs() <= 0.01 * oracle_count as f64);
        assert_eq!(gt.bbox(), Some([8, 8, 15, 5]));
    }

    #[test]
    fn occluded_middle_frame_gives_empty_mask() {
        let gt = make_gt_mask(&PathPsf::default(), &disc(5), 0.1, (16, 16)).unwrap();
        assert!(gt.is_empty());
        assert!(make_gt_mask(&PathPsf::default(), &disc(5), 1.0, (16, 16)).is_err());
    }
}
