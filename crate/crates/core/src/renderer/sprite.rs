use super::{Image, RenderError};

/// Premultiplied foreground appearance `F` with its support indicator `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForegroundSprite {
    /// 3 channels, zero wherever `m` is zero.
    pub f: Image,
    /// 1 channel.
    pub m: Image,
    /// Nominal ball width in px.
    pub diameter: f64,
}

impl ForegroundSprite {
    /// Sprite pixel that lands on the PSF pixel when splatting.
    pub fn anchor(&self) -> (i64, i64) {
        sprite_anchor(self.m.width(), self.m.height())
    }
}

pub(crate) fn sprite_anchor(width: u32, height: u32) -> (i64, i64) {
    ((i64::from(width) - 1) / 2, (i64::from(height) - 1) / 2)
}

/// White ball template: premultiplied RGB plus alpha.
#[derive(Debug, Clone, PartialEq)]
pub struct BallTemplate {
    pub rgb: Image,
    pub alpha: Image,
}

impl BallTemplate {
    /// Anti-aliased shaded white disc filling a `size`×`size` canvas.
    pub fn procedural(size: u32) -> Self {
        const SS: u32 = 4;
        let r = f64::from(size) / 2.0;
        let mut alpha = Image::zeros(size, size, 1);
        let mut rgb = Image::zeros(size, size, 3);
        for y in 0..size {
            for x in 0..size {
                let mut cover = 0.0;
                for sy in 0..SS {
                    for sx in 0..SS {
                        let px = f64::from(x) + (f64::from(sx) + 0.5) / f64::from(SS) - r;
                        let py = f64::from(y) + (f64::from(sy) + 0.5) / f64::from(SS) - r;
                        if px * px + py * py <= r * r {
                            cover += 1.0;
                        }
                    }
                }
                let cover = cover / f64::from(SS * SS);
                let (dx, dy) = (f64::from(x) + 0.5 - r, f64::from(y) + 0.5 - r);
                // soft highlight toward the upper left
                let shade = 1.0 - 0.12 * (((dx + 0.3 * r).powi(2) + (dy + 0.3 * r).powi(2)).sqrt() / r).min(1.0);
                alpha.set(x, y, 0, cover);
                for c in 0..3 {
                    rgb.set(x, y, c, cover * shade);
                }
            }
        }
        Self { rgb, alpha }
    }
}

/// Overlap of `[a0, a1]` with each unit cell `[i, i + 1]`, `0 <= i < n`.
fn overlaps(a0: f64, a1: f64, n: u32) -> Vec<(u32, f64)> {
    let lo = a0.floor().max(0.0) as i64;
    let hi = (a1.ceil() as i64).min(i64::from(n));
    (lo..hi)
        .filter_map(|i| {
            let o = a1.min(i as f64 + 1.0) - a0.max(i as f64);
            (o > 0.0).then_some((i as u32, o))
        })
        .collect()
}

/// Box-filter resample so the template's width maps to `diameter` px, centered
/// in a `ceil(diameter)`-wide canvas.
fn resample(src: &Image, scale: f64, out_w: u32, out_h: u32) -> Image {
    let (tw, th) = (f64::from(src.width()), f64::from(src.height()));
    let (cx_out, cy_out) = (f64::from(out_w) / 2.0, f64::from(out_h) / 2.0);
    let cols: Vec<Vec<(u32, f64)>> = (0..out_w)
        .map(|k| {
            let a0 = (f64::from(k) - cx_out) / scale + tw / 2.0;
            overlaps(a0, a0 + 1.0 / scale, src.width())
        })
        .collect();
    let rows: Vec<Vec<(u32, f64)>> = (0..out_h)
        .map(|k| {
            let a0 = (f64::from(k) - cy_out) / scale + th / 2.0;
            overlaps(a0, a0 + 1.0 / scale, src.height())
        })
        .collect();
    let box_area = 1.0 / (scale * scale);
    Image::from_fn(out_w, out_h, src.channels(), |x, y, c| {
        let mut acc = 0.0;
        for &(j, oy) in &rows[y as usize] {
            for &(i, ox) in &cols[x as usize] {
                acc += ox * oy * f64::from(src.get(i, j, c));
            }
        }
        acc / box_area
    })
}

/// Tints a white template by `color` and rescales it to `diameter` px wide.
pub fn tint_and_resize(base: &Image, alpha: &Image, color: [f64; 3], diameter: f64) -> Result<ForegroundSprite, RenderError> {
    if !(diameter >= 2.0) {
        return Err(RenderError::DiameterTooSmall(diameter));
    }
    if base.channels() != 3 {
        return Err(RenderError::Channels { expected: 3, actual: base.channels() });
    }
    if alpha.channels() != 1 {
        return Err(RenderError::Channels { expected: 1, actual: alpha.channels() });
    }
    if base.size() != alpha.size() {
        return Err(RenderError::SizeMismatch);
    }
    if color.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(RenderError::OutOfRange(color.into_iter().find(|c| !(0.0..=1.0).contains(c)).unwrap()));
    }
    let tinted = Image::from_fn(base.width(), base.height(), 3, |x, y, c| f64::from(base.get(x, y, c)) * color[c as usize]);
    let scale = diameter / f64::from(base.width());
    let out_w = (diameter - 1e-9).ceil() as u32;
    let out_h = ((f64::from(base.height()) * scale) - 1e-9).ceil().max(1.0) as u32;
    Ok(ForegroundSprite {
        f: resample(&tinted, scale, out_w, out_h),
        m: resample(alpha, scale, out_w, out_h),
        diameter,
    })
}

/// Uniform disc blur of a sprite, padding the canvas by `ceil(radius)` on each side.
pub fn defocus(sprite: &ForegroundSprite, radius: f64) -> ForegroundSprite {
    if radius <= 0.0 {
        return sprite.clone();
    }
    let pad = radius.ceil() as i64;
    let mut kernel = Vec::new();
    for dy in -pad..=pad {
        for dx in -pad..=pad {
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                kernel.push((dx, dy));
            }
        }
    }
    let norm = 1.0 / kernel.len() as f64;
    let blur = |src: &Image| {
        let (w, h) = (src.width() as i64 + 2 * pad, src.height() as i64 + 2 * pad);
        Image::from_fn(w as u32, h as u32, src.channels(), |x, y, c| {
            let mut acc = 0.0;
            for &(dx, dy) in &kernel {
                let (sx, sy) = (x as i64 - pad + dx, y as i64 - pad + dy);
                if sx >= 0 && sy >= 0 && sx < i64::from(src.width()) && sy < i64::from(src.height()) {
                    acc += f64::from(src.get(sx as u32, sy as u32, c));
                }
            }
            acc * norm
        })
    };
    ForegroundSprite { f: blur(&sprite.f), m: blur(&sprite.m), diameter: sprite.diameter }
}
