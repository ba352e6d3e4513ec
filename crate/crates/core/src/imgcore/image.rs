//! Raster image container with intensities normalized to `[0, 1]`.

use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageFormat};

use super::ImageError;

/// Row-major image with one or three channels of `f64` intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image from raw interleaved data.
    ///
    /// Fails when the data length does not match the dimensions, the channel
    /// count is not 1 or 3, or an intensity is outside `[0, 1]`.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        data: Vec<f64>,
    ) -> Result<Self, ImageError> {
        if channels != 1 && channels != 3 {
            return Err(ImageError::Channels(channels));
        }
        if data.len() != width * height * channels {
            return Err(ImageError::DataLength {
                expected: width * height * channels,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(ImageError::OutOfRange(*v));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Constant image.
    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        let value = value.clamp(0.0, 1.0);
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Builds an image by evaluating `f(x, y, channel)` at every sample.
    /// Values are clamped into `[0, 1]`.
    pub fn from_fn<F>(width: usize, height: usize, channels: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize, usize) -> f64,
    {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c).clamp(0.0, 1.0));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// All channels of the pixel at `(x, y)`.
    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// True when the continuous point lies inside the pixel-center domain
    /// `[0, w-1] x [0, h-1]`.
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        // Tolerates round-off from projective mapping onto the border.
        const TOL: f64 = 1e-9;
        x >= -TOL && y >= -TOL && x <= (self.width - 1) as f64 + TOL && y <= (self.height - 1) as f64 + TOL
    }

    /// Bilinear sample of every channel at a continuous position, written
    /// into `out`. Returns `false` (leaving `out` untouched) when the point
    /// is outside [`Image::contains`].
    pub fn sample_bilinear(&self, x: f64, y: f64, out: &mut [f64]) -> bool {
        if !self.contains(x, y) {
            return false;
        }
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = (x.floor() as usize).min(self.width - 1);
        let y0 = (y.floor() as usize).min(self.height - 1);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        for c in 0..self.channels {
            let a = self.get(x0, y0, c);
            let b = self.get(x1, y0, c);
            let d = self.get(x0, y1, c);
            let e = self.get(x1, y1, c);
            let top = a + (b - a) * fx;
            let bottom = d + (e - d) * fx;
            out[c] = top + (bottom - top) * fy;
        }
        true
    }

    /// Per-pixel mean over channels.
    pub fn luminance(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect()
    }

    /// Quantizes to 8 bits per channel, rounding to nearest.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    /// Writes an 8-bit PNG (gray or RGB depending on the channel count).
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        let color = if self.channels == 3 {
            image::ExtendedColorType::Rgb8
        } else {
            image::ExtendedColorType::L8
        };
        image::save_buffer_with_format(
            path,
            &self.to_bytes(),
            self.width as u32,
            self.height as u32,
            color,
            ImageFormat::Png,
        )
        .map_err(|e| ImageError::Write {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Loads an 8-bit PNG or binary PNM file, normalizing bytes to `[0, 1]`.
///
/// Color inputs yield three channels, grayscale inputs one. Alpha is dropped.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image, ImageError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            ImageError::Missing(path.to_path_buf())
        } else {
            ImageError::Read {
                path: path.to_path_buf(),
                reason: e.to_string(),
            }
        }
    })?;
    let format = sniff_format(&bytes).ok_or_else(|| ImageError::Unsupported {
        path: path.to_path_buf(),
        reason: "not a PNG or binary PNM file".into(),
    })?;
    let decoded = image::load_from_memory_with_format(&bytes, format).map_err(|e| corrupt(path, e))?;
    to_image(path, decoded)
}

fn sniff_format(bytes: &[u8]) -> Option<ImageFormat> {
    if bytes.starts_with(b"\x89PNG\r\n\x1a\n") {
        Some(ImageFormat::Png)
    } else if bytes.len() >= 2 && bytes[0] == b'P' && (bytes[1] == b'5' || bytes[1] == b'6') {
        Some(ImageFormat::Pnm)
    } else {
        None
    }
}

fn corrupt(path: &Path, e: image::ImageError) -> ImageError {
    match e {
        image::ImageError::Unsupported(u) => ImageError::Unsupported {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        other => ImageError::Corrupt {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

fn to_image(path: &Path, decoded: DynamicImage) -> Result<Image, ImageError> {
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    let unsupported = |what: &str| ImageError::Unsupported {
        path: PathBuf::from(path),
        reason: format!("{what} images are not supported"),
    };
    let (channels, bytes) = match &decoded {
        DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
            (1, decoded.to_luma8().into_raw())
        }
        DynamicImage::ImageRgb8(_) | DynamicImage::ImageRgba8(_) => {
            (3, decoded.to_rgb8().into_raw())
        }
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_) => return Err(unsupported("16-bit")),
        _ => return Err(unsupported("floating point")),
    };
    let data = bytes.into_iter().map(|b| b as f64 / 255.0).collect();
    Ok(Image {
        width: w,
        height: h,
        channels,
        data,
    })
}

/// Converts one RGB triple in `[0,1]` to HSV with hue in `[0, 1)`.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    (h, s, v)
}

/// Inverse of [`rgb_to_hsv`].
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    if s <= 0.0 {
        return (v, v, v);
    }
    let h6 = (h.rem_euclid(1.0)) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}
