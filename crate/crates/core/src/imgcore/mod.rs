//! Image and flow containers, file formats, visualization and metrics.

use std::path::PathBuf;

use thiserror::Error;

mod color;
mod flow;
mod hist;
mod image;
mod metrics;
mod raster;

pub use self::color::{color_wheel, flow_color, flow_to_color, wheel_coordinates, WHEEL_BINS};
pub use self::flow::{read_flo, read_flo_sized, write_flo, FlowField, UNKNOWN_FLOW};
pub use self::hist::{equalization_lut, equalize_value_channel, hsv_histogram_equalize};
pub use self::image::{hsv_to_rgb, load_image, rgb_to_hsv, Image};
pub use self::metrics::{
    compute_epe, endpoint_errors, epe_difference_map, occlusion_scores, DiffClass, EpeReport,
    MaskScore,
};
pub use self::raster::{
    read_f32_raster, read_label_png, write_f32_raster, write_label_png, OcclusionMask,
};

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    Missing(PathBuf),
    #[error("cannot read {path}: {reason}")]
    Read { path: PathBuf, reason: String },
    #[error("unsupported image format in {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },
    #[error("corrupt image {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("cannot write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
    #[error("unsupported channel count {0}, expected 1 or 3")]
    Channels(usize),
    #[error("image data has {got} samples, expected {expected}")]
    DataLength { expected: usize, got: usize },
    #[error("intensity {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("image dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },
}

#[derive(Debug, Error)]
pub enum FlowIoError {
    #[error("{path}: {reason}")]
    Io { path: PathBuf, reason: String },
    #[error("bad flow file magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated flow file: expected {expected} bytes, got {got}")]
    Truncated { expected: usize, got: usize },
    #[error("invalid flow dimensions {width}x{height}")]
    BadDimensions { width: i32, height: i32 },
    #[error("flow dimensions {got:?} do not match expected {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("raster dimensions {got:?} do not match {expected:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("ground-truth flow is invalid at pixel {0}")]
    InvalidGroundTruth(usize),
}
