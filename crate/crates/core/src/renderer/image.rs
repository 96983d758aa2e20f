use super::RenderError;

/// Row-major, channel-interleaved image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f32>,
}

impl Image {
    pub fn zeros(width: u32, height: u32, channels: u32) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: u32, height: u32, channels: u32, value: f32) -> Self {
        assert!(channels == 1 || channels == 3, "images have 1 or 3 channels");
        let value = value.clamp(0.0, 1.0);
        Self { width, height, channels, data: vec![value; (width * height * channels) as usize] }
    }

    pub fn from_vec(width: u32, height: u32, channels: u32, data: Vec<f32>) -> Result<Self, RenderError> {
        if channels != 1 && channels != 3 {
            return Err(RenderError::Channels { expected: 3, actual: channels });
        }
        if data.len() != (width * height * channels) as usize {
            return Err(RenderError::DataLength { expected: (width * height * channels) as usize, actual: data.len() });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(RenderError::OutOfRange(f64::from(*v)));
        }
        Ok(Self { width, height, channels, data })
    }

    /// Builds an image from a per-sample function, clamping into `[0, 1]`.
    pub fn from_fn(width: u32, height: u32, channels: u32, mut f: impl FnMut(u32, u32, u32) -> f64) -> Self {
        let mut img = Self::zeros(width, height, channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    img.set(x, y, c, f(x, y, c));
                }
            }
        }
        img
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u32 {
        self.channels
    }

    /// `(height, width)`
    pub fn size(&self) -> (u32, u32) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn index(&self, x: u32, y: u32, c: u32) -> usize {
        ((y * self.width + x) * self.channels + c) as usize
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32, c: u32) -> f32 {
        self.data[self.index(x, y, c)]
    }

    /// Stores `value` clamped into `[0, 1]`.
    #[inline]
    pub fn set(&mut self, x: u32, y: u32, c: u32, value: f64) {
        let i = self.index(x, y, c);
        self.data[i] = value.clamp(0.0, 1.0) as f32;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum()
    }

    /// Maps every sample through `f`, clamping the result.
    pub fn map(&self, mut f: impl FnMut(f32) -> f64) -> Image {
        let data = self.data.iter().map(|&v| f(v).clamp(0.0, 1.0) as f32).collect();
        Image { data, ..*self }
    }

    /// Integer translation; uncovered pixels become zero.
    pub fn shifted(&self, dx: i64, dy: i64) -> Image {
        let mut out = Image::zeros(self.width, self.height, self.channels);
        for y in 0..self.height {
            let sy = i64::from(y) - dy;
            if sy < 0 || sy >= i64::from(self.height) {
                continue;
            }
            for x in 0..self.width {
                let sx = i64::from(x) - dx;
                if sx < 0 || sx >= i64::from(self.width) {
                    continue;
                }
                for c in 0..self.channels {
                    let v = self.get(sx as u32, sy as u32, c);
                    let i = out.index(x, y, c);
                    out.data[i] = v;
                }
            }
        }
        out
    }

    /// Number of nonzero pixels of a single-channel image.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Tight `[x, y, w, h]` box around the nonzero pixels of a single-channel image.
    pub fn nonzero_bbox(&self) -> Option<[u32; 4]> {
        let mut b: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y, 0) != 0.0 {
                    b = Some(match b {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        b.map(|(x0, y0, x1, y1)| [x0, y0, x1 - x0 + 1, y1 - y0 + 1])
    }

    /// Nearest-neighbour upscale by an integer factor.
    pub fn upscale_nearest(&self, factor: u32) -> Image {
        Image::from_fn(self.width * factor, self.height * factor, self.channels, |x, y, c| {
            f64::from(self.get(x / factor, y / factor, c))
        })
    }
}
