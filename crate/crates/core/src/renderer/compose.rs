use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::sprite::defocus;
use super::{ForegroundSprite, Image, RenderError};
use crate::synthgen::PathPsf;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderParams {
    /// Over-exposure brightness factor relative to full scale.
    pub b_f: f64,
    /// Disc blur radius applied to the sprite (aperture), px.
    pub defocus_radius: f64,
    /// Std-dev of additive Gaussian sensor noise.
    pub sensor_noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for RenderParams {
    fn default() -> Self {
        Self { b_f: 1.0, defocus_radius: 0.0, sensor_noise_sigma: 0.0, noise_seed: 0 }
    }
}

/// Unclipped `[P * b_f F]` and `[P * M]` layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    pub width: u32,
    pub height: u32,
    /// 3 channels, interleaved.
    pub foreground: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl Splat {
    pub fn foreground_sum(&self) -> f64 {
        self.foreground.iter().sum()
    }
}

fn check_psf(psf: &PathPsf, size: (u32, u32)) -> Result<(), RenderError> {
    match psf.entries.iter().find(|e| e.y >= size.0 || e.x >= size.1) {
        Some(e) => Err(RenderError::PsfOutOfBounds { x: e.x, y: e.y }),
        None => Ok(()),
    }
}

/// Convolves the sprite with a sparse PSF by weighted splatting: each PSF
/// pixel receives a copy of the sprite with its anchor on that pixel.
pub fn splat_sprite(sprite: &ForegroundSprite, psf: &PathPsf, b_f: f64, size: (u32, u32)) -> Result<Splat, RenderError> {
    check_psf(psf, size)?;
    let (height, width) = size;
    let mut out = Splat {
        width,
        height,
        foreground: vec![0.0; (width * height * 3) as usize],
        alpha: vec![0.0; (width * height) as usize],
    };
    splat_into(&mut out, &sprite.f, &sprite.m, psf, b_f);
    Ok(out)
}

fn splat_into(out: &mut Splat, f: &Image, m: &Image, psf: &PathPsf, b_f: f64) {
    let (ax, ay) = super::sprite::sprite_anchor(m.width(), m.height());
    let (w, h) = (i64::from(out.width), i64::from(out.height));
    for e in &psf.entries {
        let (ox, oy) = (i64::from(e.x) - ax, i64::from(e.y) - ay);
        for sy in 0..m.height() {
            let y = oy + i64::from(sy);
            if y < 0 || y >= h {
                continue;
            }
            for sx in 0..m.width() {
                let x = ox + i64::from(sx);
                if x < 0 || x >= w {
                    continue;
                }
                let mv = f64::from(m.get(sx, sy, 0));
                let i = (y * w + x) as usize;
                out.alpha[i] += e.weight * mv;
                for c in 0..3 {
                    out.foreground[3 * i + c] += e.weight * b_f * f64::from(f.get(sx, sy, c as u32));
                }
            }
        }
    }
}

/// Renders one frame as `clip(P * b_f F + (1 - P * M) B)`, returning the
/// frame and the clipped matte `P * M`.
pub fn synthesize_frame(
    background: &Image,
    sprite: &ForegroundSprite,
    psf: &PathPsf,
    params: &RenderParams,
) -> Result<(Image, Image), RenderError> {
    if background.channels() != 3 {
        return Err(RenderError::Channels { expected: 3, actual: background.channels() });
    }
    if !(params.b_f > 0.0) {
        return Err(RenderError::InvalidParams(format!("b_f must be positive, got {}", params.b_f)));
    }
    if !(params.defocus_radius >= 0.0 && params.sensor_noise_sigma >= 0.0) {
        return Err(RenderError::InvalidParams("defocus radius and noise sigma must be nonnegative".into()));
    }
    let (height, width) = background.size();
    if sprite.m.width() > width || sprite.m.height() > height {
        return Err(RenderError::SpriteTooLarge);
    }
    check_psf(psf, (height, width))?;
    if psf.is_empty() {
        return Ok((background.clone(), Image::zeros(width, height, 1)));
    }

    let blurred;
    let sprite = if params.defocus_radius > 0.0 {
        blurred = defocus(sprite, params.defocus_radius);
        &blurred
    } else {
        sprite
    };
    let splat = splat_sprite(sprite, psf, params.b_f, (height, width))?;

    let mut noise = (params.sensor_noise_sigma > 0.0).then(|| {
        (ChaCha8Rng::seed_from_u64(params.noise_seed), Normal::new(0.0, params.sensor_noise_sigma).expect("sigma checked"))
    });
    let mut frame = Image::zeros(width, height, 3);
    let mut matte = Image::zeros(width, height, 1);
    for y in 0..height {
        for x in 0..width {
            let i = (y * width + x) as usize;
            let a = splat.alpha[i];
            matte.set(x, y, 0, a);
            for c in 0..3 {
                let mut v = splat.foreground[3 * i + c as usize] + (1.0 - a) * f64::from(background.get(x, y, c));
                if let Some((rng, dist)) = noise.as_mut() {
                    v += dist.sample(rng);
                }
                frame.set(x, y, c, v);
            }
        }
    }
    Ok((frame, matte))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::renderer::{tint_and_resize, BallTemplate};
    use crate::synthgen::PsfEntry;

    fn disc_sprite(d: u32) -> ForegroundSprite {
        let r = f64::from(d) / 2.0;
        let m = Image::from_fn(d, d, 1, |x, y, _| {
            let (dx, dy) = (f64::from(x) + 0.5 - r, f64::from(y) + 0.5 - r);
            if dx * dx + dy * dy <= r * r { 1.0 } else { 0.0 }
        });
        let f = Image::from_fn(d, d, 3, |x, y, _| f64::from(m.get(x, y, 0)));
        ForegroundSprite { f, m, diameter: f64::from(d) }
    }

    fn delta(x: u32, y: u32) -> PathPsf {
        PathPsf { frame_index: 0, entries: vec![PsfEntry { x, y, weight: 1.0 }] }
    }

    #[test]
    fn delta_psf_white_disc_on_gray() {
        let bg = Image::filled(32, 24, 3, 0.5);
        let sprite = disc_sprite(7);
        let (img, alpha) = synthesize_frame(&bg, &sprite, &delta(10, 12), &RenderParams::default()).unwrap();
        let (ax, ay) = sprite.anchor();
        for y in 0..24 {
            for x in 0..32 {
                let (sx, sy) = (i64::from(x) - 10 + ax, i64::from(y) - 12 + ay);
                let inside = sx >= 0 && sy >= 0 && sx < 7 && sy < 7 && sprite.m.get(sx as u32, sy as u32, 0) == 1.0;
                let want = if inside { 1.0 } else { 0.5 };
                assert_eq!(img.get(x, y, 1), want, "({x},{y})");
                assert_eq!(alpha.get(x, y, 0), if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn over_exposed_interior_clips_to_one() {
        let bg = Image::filled(32, 32, 3, 0.3);
        let (img, _) = synthesize_frame(&bg, &disc_sprite(9), &delta(16, 16), &RenderParams { b_f: 1.4, ..Default::default() }).unwrap();
        assert_eq!(img.get(16, 16, 0), 1.0);
        assert!(img.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn flux_is_conserved_for_interior_paths() {
        let t = BallTemplate::procedural(32);
        let sprite = tint_and_resize(&t.rgb, &t.alpha, [0.9, 0.6, 0.3], 6.0).unwrap();
        let psf = PathPsf {
            frame_index: 0,
            entries: vec![
                PsfEntry { x: 20, y: 20, weight: 0.1 },
                PsfEntry { x: 21, y: 20, weight: 0.3 },
                PsfEntry { x: 22, y: 21, weight: 0.35 },
                PsfEntry { x: 23, y: 21, weight: 0.25 },
            ],
        };
        let splat = splat_sprite(&sprite, &psf, 1.3, (48, 48)).unwrap();
        let want = 1.3 * sprite.f.sum();
        assert!((splat.foreground_sum() - want).abs() / want < 1e-4);
    }

    #[test]
    fn empty_psf_returns_background() {
        let bg = Image::filled(20, 20, 3, 0.25);
        let (img, alpha) = synthesize_frame(&bg, &disc_sprite(5), &PathPsf::default(), &RenderParams::default()).unwrap();
        assert_eq!(img, bg);
        assert_eq!(alpha.sum(), 0.0);
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let bg = Image::filled(20, 20, 3, 0.5);
        let p = RenderParams { sensor_noise_sigma: 0.2, noise_seed: 7, ..Default::default() };
        let a = synthesize_frame(&bg, &disc_sprite(5), &delta(5, 5), &p).unwrap().0;
        let b = synthesize_frame(&bg, &disc_sprite(5), &delta(5, 5), &p).unwrap().0;
        assert_eq!(a, b);
        assert_ne!(a.get(15, 15, 0), 0.5);
    }

    #[test]
    fn rejects_psf_outside_background() {
        let bg = Image::filled(20, 20, 3, 0.5);
        let err = synthesize_frame(&bg, &disc_sprite(5), &delta(25, 5), &RenderParams::default()).unwrap_err();
        assert!(matches!(err, RenderError::PsfOutOfBounds { x: 25, y: 5 }));
    }
}
