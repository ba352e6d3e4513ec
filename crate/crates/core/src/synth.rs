//! Synthetic planar scenes with exact ground-truth flow and occlusion.
//!
//! Each region is a polygon in the first frame carrying a continuous texture
//! and a homography into the second frame. The second frame is rendered by
//! inverse mapping, so no resampling error enters the ground truth.

use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::homography::{fit_dlt, Homography};
use crate::imgcore::{hsv_to_rgb, rgb_to_hsv, FlowField, Image, OcclusionMask};
use crate::plane_match::mix_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("region {0} has a degenerate polygon")]
    DegeneratePolygon(usize),
    #[error("region {0}: homography horizon crosses the frame")]
    HorizonInFrame(usize),
    #[error("pixel ({0}, {1}) is not covered by any region")]
    Uncovered(usize, usize),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("scene has no regions")]
    Empty,
}

/// Band-limited texture: per channel, a sum of sinusoids with random
/// directions, wavelengths in `wavelengths` and phases.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TextureSpec {
    pub base: [f64; 3],
    pub amplitude: f64,
    pub wavelengths: (f64, f64),
    pub components: usize,
}

impl Default for TextureSpec {
    fn default() -> Self {
        Self {
            base: [0.45; 3],
            amplitude: 0.042,
            wavelengths: (8.0, 32.0),
            components: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub polygon: Vec<Point2<f64>>,
    pub h: Homography,
    /// Smaller is nearer to the camera.
    pub depth: u32,
    pub texture: TextureSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub regions: Vec<Region>,
    pub texture_seed: u64,
    /// Standard deviation of additive Gaussian noise on both frames.
    pub noise_sigma: f64,
    /// Added to the HSV value channel of the second frame.
    pub brightness_shift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub img1: Image,
    pub img2: Image,
    pub flow: FlowField,
    pub occlusion: OcclusionMask,
    /// Region index owning each pixel of the first frame.
    pub owner: Vec<usize>,
}

struct Texture {
    // (kx, ky, phase) per component, per channel.
    waves: [Vec<(f64, f64, f64)>; 3],
    base: [f64; 3],
    amplitude: f64,
}

impl Texture {
    fn new(spec: &TextureSpec, rng: &mut ChaCha8Rng) -> Self {
        let mut waves: [Vec<(f64, f64, f64)>; 3] = Default::default();
        let (lo, hi) = spec.wavelengths;
        for channel in waves.iter_mut() {
            for _ in 0..spec.components {
                let lambda = if hi > lo { rng.random_range(lo..hi) } else { lo };
                let theta = rng.random_range(0.0..std::f64::consts::PI);
                let k = 2.0 * std::f64::consts::PI / lambda;
                let phase = rng.random_range(0.0..2.0 * std::f64::consts::PI);
                channel.push((k * theta.cos(), k * theta.sin(), phase));
            }
        }
        Self {
            waves,
            base: spec.base,
            amplitude: spec.amplitude,
        }
    }

    fn eval(&self, p: Point2<f64>) -> [f64; 3] {
        let mut out = [0.0; 3];
        for c in 0..3 {
            let s: f64 = self.waves[c].iter().map(|(kx, ky, ph)| (kx * p.x + ky * p.y + ph).sin()).sum();
            out[c] = (self.base[c] + self.amplitude * s).clamp(0.0, 1.0);
        }
        out
    }
}

/// Even-odd point-in-polygon test.
pub fn polygon_contains(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let mut inside = false;
    let n = poly.len();
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            inside = !inside;
        }
        j = i;
    }
    inside
}

fn polygon_area(poly: &[Point2<f64>]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.x * b.y - b.x * a.y
        })
        .sum::<f64>()
        .abs()
        / 2.0
}

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` as a polygon.
pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Point2<f64>> {
    vec![
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ]
}

fn shift_value(img: &Image, shift: f64) -> Image {
    let data = img
        .data()
        .chunks_exact(3)
        .flat_map(|px| {
            let (h, s, v) = rgb_to_hsv(px[0], px[1], px[2]);
            let (r, g, b) = hsv_to_rgb(h, s, (v + shift).clamp(0.0, 1.0));
            [r, g, b]
        })
        .collect();
    Image::new(img.width(), img.height(), 3, data).expect("same shape")
}

fn add_noise(img: &Image, sigma: f64, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let data = img.data().iter().map(|v| (v + normal.sample(&mut rng)).clamp(0.0, 1.0)).collect();
    Image::new(img.width(), img.height(), img.channels(), data).expect("same shape")
}

/// Renders both frames and the ground truth of a planar scene.
///
/// A first-frame pixel belongs to the nearest region whose polygon contains
/// it. A second-frame pixel `q` shows the nearest region `R` with
/// `H_R^-1 q` inside `R`'s polygon, falling back to the farthest region's
/// texture. A first-frame pixel is occluded when its target leaves the
/// frame or a nearer region covers the target.
pub fn make_plane_scene(spec: &SceneSpec) -> Result<Scene, SynthError> {
    if spec.regions.is_empty() {
        return Err(SynthError::Empty);
    }
    let (w, h) = (spec.width, spec.height);
    let mut inverses = Vec::with_capacity(spec.regions.len());
    for (k, r) in spec.regions.iter().enumerate() {
        if r.polygon.len() < 3 || polygon_area(&r.polygon) < 1e-9 {
            return Err(SynthError::DegeneratePolygon(k));
        }
        if !r.h.is_finite_on_image(w, h) {
            return Err(SynthError::HorizonInFrame(k));
        }
        let inv = r.h.inverse().map_err(|_| SynthError::HorizonInFrame(k))?;
        if !inv.is_finite_on_image(w, h) {
            return Err(SynthError::HorizonInFrame(k));
        }
        inverses.push(inv);
    }
    let textures: Vec<Texture> = spec
        .regions
        .iter()
        .enumerate()
        .map(|(k, r)| Texture::new(&r.texture, &mut ChaCha8Rng::seed_from_u64(mix_seed(spec.texture_seed, &[k as u64]))))
        .collect();
    // Nearest first; ties by listing order.
    let mut order: Vec<usize> = (0..spec.regions.len()).collect();
    order.sort_by_key(|&k| (spec.regions[k].depth, k));
    let farthest = *order.last().expect("non-empty");

    // Region visible at a continuous second-frame point, with its source point.
    let visible_at = |q: Point2<f64>| -> Option<(usize, Point2<f64>)> {
        order.iter().find_map(|&k| {
            let p = inverses[k].try_apply(q.x, q.y)?;
            polygon_contains(&spec.regions[k].polygon, p).then_some((k, p))
        })
    };

    let mut d1 = Vec::with_capacity(w * h * 3);
    let mut owner = Vec::with_capacity(w * h);
    let mut flow = FlowField::invalid(w, h);
    let mut occ = OcclusionMask::empty(w, h);
    for y in 0..h {
        for x in 0..w {
            let p = Point2::new(x as f64, y as f64);
            let k = *order
                .iter()
                .find(|&&k| polygon_contains(&spec.regions[k].polygon, p))
                .ok_or(SynthError::Uncovered(x, y))?;
            d1.extend_from_slice(&textures[k].eval(p));
            owner.push(k);
            let q = spec.regions[k].h.try_apply(p.x, p.y).ok_or(SynthError::HorizonInFrame(k))?;
            let i = y * w + x;
            flow.set_index(i, Vector2::new(q.x - p.x, q.y - p.y));
            const TOL: f64 = 1e-9;
            let outside = q.x < -TOL || q.y < -TOL || q.x > (w - 1) as f64 + TOL || q.y > (h - 1) as f64 + TOL;
            let covered = !outside
                && order.iter().take_while(|&&j| j != k).any(|&j| {
                    spec.regions[j].depth < spec.regions[k].depth
                        && inverses[j]
                            .try_apply(q.x, q.y)
                            .is_some_and(|pj| polygon_contains(&spec.regions[j].polygon, pj))
                });
            occ.set(i, outside || covered);
        }
    }

    let mut d2 = Vec::with_capacity(w * h * 3);
    for y in 0..h {
        for x in 0..w {
            let q = Point2::new(x as f64, y as f64);
            let color = match visible_at(q) {
                Some((k, p)) => textures[k].eval(p),
                None => {
                    let p = inverses[farthest].try_apply(q.x, q.y).unwrap_or(q);
                    textures[farthest].eval(p)
                }
            };
            d2.extend_from_slice(&color);
        }
    }

    let mut img1 = Image::new(w, h, 3, d1).expect("rendered size");
    let mut img2 = Image::new(w, h, 3, d2).expect("rendered size");
    if spec.brightness_shift != 0.0 {
        img2 = shift_value(&img2, spec.brightness_shift);
    }
    if spec.noise_sigma > 0.0 {
        img1 = add_noise(&img1, spec.noise_sigma, mix_seed(spec.texture_seed, &[101]));
        img2 = add_noise(&img2, spec.noise_sigma, mix_seed(spec.texture_seed, &[102]));
    }
    Ok(Scene {
        img1,
        img2,
        flow,
        occlusion: occ,
        owner,
    })
}

/// Homography taking the corners of `poly`'s bounding box to the same
/// corners translated by `t` and individually nudged by `nudge`.
fn corner_homography(x0: f64, y0: f64, x1: f64, y1: f64, t: Vector2<f64>, nudge: [[f64; 2]; 4]) -> Homography {
    let corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)];
    let pairs: Vec<_> = corners
        .iter()
        .zip(nudge)
        .map(|(&(x, y), n)| (Point2::new(x, y), Point2::new(x + t.x + n[0], y + t.y + n[1])))
        .collect();
    fit_dlt(&pairs).expect("non-degenerate corners")
}

fn background(width: usize, height: usize, h: Homography, texture: TextureSpec) -> Region {
    // Slightly larger than the frame so every pixel center is inside.
    Region {
        polygon: rect(-1.0, -1.0, width as f64, height as f64),
        h,
        depth: 1,
        texture,
    }
}

/// Named synthetic fixtures.
pub const FIXTURES: [&str; 4] = ["two-plane", "small-plane", "thin-bar", "brightness"];

/// 256 x 256: slowly zooming background and a projective foreground
/// quadrilateral moving about 12 px relative to it.
pub fn two_plane_fixture(texture_seed: u64) -> SceneSpec {
    let (w, h) = (256, 256);
    let bg = corner_homography(0.0, 0.0, 255.0, 255.0, Vector2::new(1.0, 0.5), [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]]);
    let fg = corner_homography(
        70.0,
        80.0,
        170.0,
        180.0,
        Vector2::new(10.0, 6.0),
        [[0.0, 0.0], [1.5, -1.0], [2.5, 1.0], [-1.0, 2.0]],
    );
    SceneSpec {
        width: w,
        height: h,
        regions: vec![
            Region {
                polygon: vec![
                    Point2::new(70.0, 80.0),
                    Point2::new(170.0, 84.0),
                    Point2::new(166.0, 180.0),
                    Point2::new(74.0, 176.0),
                ],
                h: fg,
                depth: 0,
                texture: TextureSpec {
                    base: [0.5, 0.42, 0.4],
                    wavelengths: (8.0, 24.0),
                    ..TextureSpec::default()
                },
            },
            background(w, h, bg, TextureSpec {
                base: [0.42, 0.46, 0.5],
                wavelengths: (10.0, 32.0),
                ..TextureSpec::default()
            }),
        ],
        texture_seed,
        noise_sigma: 0.0,
        brightness_shift: 0.0,
    }
}

/// 256 x 256 static background with a 30 x 30 square moving by (9, -5).
pub fn small_plane_fixture(texture_seed: u64) -> SceneSpec {
    let (w, h) = (256, 256);
    SceneSpec {
        width: w,
        height: h,
        regions: vec![
            Region {
                polygon: rect(110.0, 100.0, 139.0, 129.0),
                h: Homography::translation(9.0, -5.0),
                depth: 0,
                texture: TextureSpec {
                    base: [0.55, 0.45, 0.38],
                    wavelengths: (8.0, 20.0),
                    ..TextureSpec::default()
                },
            },
            background(w, h, Homography::identity(), TextureSpec {
                base: [0.4, 0.45, 0.52],
                ..TextureSpec::default()
            }),
        ],
        texture_seed,
        noise_sigma: 0.0,
        brightness_shift: 0.0,
    }
}

/// 128 x 128 low-contrast static background with a 3 px wide, 80 px tall,
/// high-contrast vertical bar moving 12 px to the right.
pub fn thin_bar_fixture(texture_seed: u64) -> SceneSpec {
    let (w, h) = (128, 128);
    SceneSpec {
        width: w,
        height: h,
        regions: vec![
            Region {
                polygon: rect(49.5, 23.5, 52.5, 103.5),
                h: Homography::translation(12.0, 0.0),
                depth: 0,
                texture: TextureSpec {
                    base: [0.85, 0.8, 0.2],
                    amplitude: 0.05,
                    wavelengths: (6.0, 16.0),
                    components: 16,
                },
            },
            background(w, h, Homography::identity(), TextureSpec {
                base: [0.3, 0.32, 0.35],
                amplitude: 0.006,
                ..TextureSpec::default()
            }),
        ],
        texture_seed,
        noise_sigma: 0.0,
        brightness_shift: 0.0,
    }
}

/// [`two_plane_fixture`] with the second frame brightened by 0.15 in HSV
/// value.
pub fn brightness_fixture(texture_seed: u64) -> SceneSpec {
    SceneSpec {
        brightness_shift: 0.15,
        ..two_plane_fixture(texture_seed)
    }
}

pub fn fixture_by_name(name: &str, texture_seed: u64) -> Result<SceneSpec, SynthError> {
    match name {
        "two-plane" => Ok(two_plane_fixture(texture_seed)),
        "small-plane" => Ok(small_plane_fixture(texture_seed)),
        "thin-bar" => Ok(thin_bar_fixture(texture_seed)),
        "brightness" => Ok(brightness_fixture(texture_seed)),
        other => Err(SynthError::UnknownFixture(other.to_string())),
    }
}
