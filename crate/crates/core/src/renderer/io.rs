//! 8-bit PNG loading and saving.

use std::path::Path;

use image::{GrayImage, RgbImage};

use super::{BallTemplate, Image, RenderError};

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> RenderError {
    RenderError::Io(format!("{}: {e}", path.display()))
}

/// Loads an 8-bit frame as a 3-channel image.
pub fn load_rgb(path: &Path) -> Result<Image, RenderError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.to_rgb8();
    let data = img.as_raw().iter().map(|&v| f32::from(v) / 255.0).collect();
    Image::from_vec(img.width(), img.height(), 3, data)
}

/// Loads an 8-bit grayscale image as a 1-channel image.
pub fn load_gray(path: &Path) -> Result<Image, RenderError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.to_luma8();
    let data = img.as_raw().iter().map(|&v| f32::from(v) / 255.0).collect();
    Image::from_vec(img.width(), img.height(), 1, data)
}

/// Loads an RGBA ball template; color is premultiplied by alpha.
pub fn load_template(path: &Path) -> Result<BallTemplate, RenderError> {
    let img = image::open(path).map_err(|e| io_err(path, e))?.to_rgba8();
    let (w, h) = img.dimensions();
    let mut rgb = Image::zeros(w, h, 3);
    let mut alpha = Image::zeros(w, h, 1);
    for (x, y, p) in img.enumerate_pixels() {
        let a = f64::from(p[3]) / 255.0;
        alpha.set(x, y, 0, a);
        for c in 0..3 {
            rgb.set(x, y, c as u32, f64::from(p[c]) / 255.0 * a);
        }
    }
    Ok(BallTemplate { rgb, alpha })
}

/// Saves a 1- or 3-channel image as an 8-bit PNG.
pub fn save_png(img: &Image, path: &Path) -> Result<(), RenderError> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| quantize(v)).collect();
    let res = if img.channels() == 3 {
        RgbImage::from_raw(img.width(), img.height(), bytes).expect("buffer size").save(path)
    } else {
        GrayImage::from_raw(img.width(), img.height(), bytes).expect("buffer size").save(path)
    };
    res.map_err(|e| io_err(path, e))
}

/// Frames of a clip directory, in file-name order.
pub fn load_clip(dir: &Path) -> Result<Vec<Image>, RenderError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|x| x.to_str())
                .is_some_and(|x| matches!(x.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    paths.sort();
    paths.iter().map(|p| load_rgb(p)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rgb_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.png");
        let img = Image::from_fn(13, 7, 3, |x, y, c| f64::from(x * 7 + y * 3 + c * 11) / 137.0);
        save_png(&img, &path).unwrap();
        let back = load_rgb(&path).unwrap();
        let max_err = img.data().iter().zip(back.data()).map(|(a, b)| (a - b).abs()).fold(0.0f32, f32::max);
        assert!(max_err <= 1.0 / 255.0);
    }

    #[test]
    fn template_alpha_premultiplies_color() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ball.png");
        let mut rgba = image::RgbaImage::new(2, 1);
        rgba.put_pixel(0, 0, image::Rgba([255, 255, 255, 255]));
        rgba.put_pixel(1, 0, image::Rgba([255, 255, 255, 0]));
        rgba.save(&path).unwrap();
        let t = load_template(&path).unwrap();
        assert_eq!(t.alpha.get(0, 0, 0), 1.0);
        assert_eq!(t.rgb.get(1, 0, 0), 0.0);
        assert!(load_rgb(&dir.path().join("missing.png")).is_err());
    }
}
