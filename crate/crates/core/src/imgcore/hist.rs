//! Histogram equalization of the HSV value channel.

use super::image::{hsv_to_rgb, rgb_to_hsv};
use super::{Image, ImageError};

const LEVELS: usize = 256;

/// Equalization lookup table for a 256-bin histogram, following the usual
/// `round((cdf(i) - cdf_min) / (n - cdf_min) * 255)` mapping. A histogram
/// with a single occupied bin maps every level to itself.
pub fn equalization_lut(hist: &[u64; LEVELS]) -> [u8; LEVELS] {
    let total: u64 = hist.iter().sum();
    let cdf_min = hist.iter().copied().find(|c| *c > 0).unwrap_or(0);
    let mut lut = [0u8; LEVELS];
    if total == cdf_min {
        for (i, l) in lut.iter_mut().enumerate() {
            *l = i as u8;
        }
        return lut;
    }
    let denom = (total - cdf_min) as f64;
    let mut cdf = 0u64;
    for (i, l) in lut.iter_mut().enumerate() {
        cdf += hist[i];
        let mapped = (cdf.saturating_sub(cdf_min)) as f64 / denom * 255.0;
        *l = mapped.round().clamp(0.0, 255.0) as u8;
    }
    lut
}

fn quantize(v: f64) -> usize {
    (v * 255.0).round().clamp(0.0, 255.0) as usize
}

/// Equalizes the V channel of one RGB image over its own 256-bin histogram,
/// keeping hue and saturation.
pub fn equalize_value_channel(img: &Image) -> Result<Image, ImageError> {
    if img.channels() != 3 {
        return Err(ImageError::Channels(img.channels()));
    }
    let hsv: Vec<(f64, f64, f64)> = img
        .data()
        .chunks_exact(3)
        .map(|px| rgb_to_hsv(px[0], px[1], px[2]))
        .collect();
    let mut hist = [0u64; LEVELS];
    for &(_, _, v) in &hsv {
        hist[quantize(v)] += 1;
    }
    let lut = equalization_lut(&hist);
    let mut data = Vec::with_capacity(img.data().len());
    for &(h, s, v) in &hsv {
        let v_eq = lut[quantize(v)] as f64 / 255.0;
        let (r, g, b) = hsv_to_rgb(h, s, v_eq);
        data.extend_from_slice(&[r.clamp(0.0, 1.0), g.clamp(0.0, 1.0), b.clamp(0.0, 1.0)]);
    }
    Image::new(img.width(), img.height(), 3, data)
}

/// Equalizes both images of a pair independently in HSV space.
pub fn hsv_histogram_equalize(a: &Image, b: &Image) -> Result<(Image, Image), ImageError> {
    Ok((equalize_value_channel(a)?, equalize_value_channel(b)?))
}
