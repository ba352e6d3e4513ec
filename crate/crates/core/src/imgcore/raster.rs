//! Boolean masks and auxiliary raster formats: PNG masks, float32 sidecar
//! rasters and 32-bit label PNGs.

use std::fs;
use std::path::Path;

use image::ImageFormat;

use super::{FlowIoError, ImageError};

/// Per-pixel occlusion flags. Occluded pixels are written as 255 in PNGs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcclusionMask {
    width: usize,
    height: usize,
    occluded: Vec<bool>,
}

impl OcclusionMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            occluded: vec![false; width * height],
        }
    }

    pub fn from_vec(width: usize, height: usize, occluded: Vec<bool>) -> Self {
        assert_eq!(occluded.len(), width * height, "mask length mismatch");
        Self {
            width,
            height,
            occluded,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.occluded.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occluded.is_empty()
    }

    #[inline]
    pub fn is_occluded(&self, i: usize) -> bool {
        self.occluded[i]
    }

    pub fn set(&mut self, i: usize, occluded: bool) {
        self.occluded[i] = occluded;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.occluded
    }

    pub fn count(&self) -> usize {
        self.occluded.iter().filter(|o| **o).count()
    }

    pub fn to_png_bytes(&self) -> Vec<u8> {
        self.occluded.iter().map(|o| if *o { 255 } else { 0 }).collect()
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        image::save_buffer_with_format(
            path,
            &self.to_png_bytes(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::L8,
            ImageFormat::Png,
        )
        .map_err(|e| ImageError::Write {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Loads a mask image; any channel mean above one half counts as occluded.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ImageError> {
        let img = super::load_image(path)?;
        let occluded = img.luminance().into_iter().map(|v| v > 0.5).collect();
        Ok(Self::from_vec(img.width(), img.height(), occluded))
    }
}

const SIDECAR_MAGIC: &[u8; 4] = b"PIEF";

/// Writes a float32 raster with a 12-byte header mirroring `.flo`: magic
/// `PIEF`, little-endian `i32` width and height, then row-major `f32` values.
pub fn write_f32_raster(
    values: &[f64],
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<(), FlowIoError> {
    assert_eq!(values.len(), width * height, "raster length mismatch");
    let path = path.as_ref();
    let mut out = Vec::with_capacity(12 + 4 * values.len());
    out.extend_from_slice(SIDECAR_MAGIC);
    out.extend_from_slice(&(width as i32).to_le_bytes());
    out.extend_from_slice(&(height as i32).to_le_bytes());
    for v in values {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    fs::write(path, out).map_err(|e| FlowIoError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads a raster written by [`write_f32_raster`].
pub fn read_f32_raster(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f64>), FlowIoError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| FlowIoError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    if bytes.len() < 12 {
        return Err(FlowIoError::Truncated {
            expected: 12,
            got: bytes.len(),
        });
    }
    if &bytes[0..4] != SIDECAR_MAGIC {
        return Err(FlowIoError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
    }
    let w = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let h = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if w < 0 || h < 0 {
        return Err(FlowIoError::BadDimensions {
            width: w,
            height: h,
        });
    }
    let (w, h) = (w as usize, h as usize);
    let expected = 12 + 4 * w * h;
    if bytes.len() < expected {
        return Err(FlowIoError::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    let values = bytes[12..expected]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok((w, h, values))
}

/// Writes 32-bit labels as an RGBA8 PNG, one label per pixel packed
/// big-endian into the four channels.
pub fn write_label_png(
    labels: &[u32],
    width: usize,
    height: usize,
    path: impl AsRef<Path>,
) -> Result<(), ImageError> {
    assert_eq!(labels.len(), width * height, "label length mismatch");
    let path = path.as_ref();
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_be_bytes()).collect();
    image::save_buffer_with_format(
        path,
        &bytes,
        width as u32,
        height as u32,
        image::ExtendedColorType::Rgba8,
        ImageFormat::Png,
    )
    .map_err(|e| ImageError::Write {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads labels written by [`write_label_png`].
pub fn read_label_png(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<u32>), ImageError> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|e| ImageError::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgba = img.to_rgba8();
    let (w, h) = (rgba.width() as usize, rgba.height() as usize);
    let labels = rgba
        .into_raw()
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((w, h, labels))
}
