#![allow(dead_code)]

use msgpm::homography::Homography;
use msgpm::imgcore::{FlowField, Image};
use msgpm::patchmatch::{Nnf, PatchMatchConfig};
use msgpm::synth::{polygon_contains, rect, Region, Scene, SceneSpec, TextureSpec};
use nalgebra::{Point2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn region(polygon: Vec<Point2<f64>>, h: Homography, depth: u32, texture: TextureSpec) -> Region {
    Region {
        polygon,
        h,
        depth,
        texture,
    }
}

pub fn full_frame(w: usize, h: usize, hom: Homography, texture: TextureSpec) -> Region {
    region(rect(-1.0, -1.0, w as f64, h as f64), hom, 1, texture)
}

pub fn spec(w: usize, h: usize, regions: Vec<Region>, seed: u64) -> SceneSpec {
    SceneSpec {
        width: w,
        height: h,
        regions,
        texture_seed: seed,
        noise_sigma: 0.0,
        brightness_shift: 0.0,
    }
}

pub fn fine_texture(base: [f64; 3]) -> TextureSpec {
    TextureSpec {
        base,
        amplitude: 0.05,
        wavelengths: (4.0, 10.0),
        components: 16,
    }
}

fn random_offset(x: usize, y: usize, w: usize, h: usize, rng: &mut ChaCha8Rng) -> Vector2<f64> {
    let tx = rng.random_range(0..w) as f64;
    let ty = rng.random_range(0..h) as f64;
    Vector2::new(tx - x as f64, ty - y as f64)
}

/// Forward and backward NNFs built from the planted geometry: exact rounded
/// correspondences where the point is visible in the other frame, uniform
/// random targets elsewhere.
pub fn ground_truth_nnfs(spec: &SceneSpec, scene: &Scene, seed: u64, radius: usize) -> (Nnf, Nnf) {
    let (w, h) = (spec.width, spec.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fwd = FlowField::from_fn(w, h, |x, y| {
        let i = y * w + x;
        if scene.occlusion.is_occluded(i) {
            random_offset(x, y, w, h, &mut rng)
        } else {
            scene.flow.get_index(i).unwrap()
        }
    });
    let mut order: Vec<usize> = (0..spec.regions.len()).collect();
    order.sort_by_key(|&k| (spec.regions[k].depth, k));
    let bwd = FlowField::from_fn(w, h, |x, y| {
        let q = Point2::new(x as f64, y as f64);
        let hit = order.iter().find_map(|&k| {
            let r = &spec.regions[k];
            let p = r.h.inverse().ok()?.try_apply(q.x, q.y)?;
            polygon_contains(&r.polygon, p).then_some(p)
        });
        match hit {
            Some(p) if p.x >= -0.5 && p.y >= -0.5 && p.x < w as f64 - 0.5 && p.y < h as f64 - 0.5 => {
                Vector2::new(p.x - q.x, p.y - q.y)
            }
            _ => random_offset(x, y, w, h, &mut rng),
        }
    });
    (
        Nnf::from_flow(&fwd, &scene.img1, &scene.img2, radius).unwrap(),
        Nnf::from_flow(&bwd, &scene.img2, &scene.img1, radius).unwrap(),
    )
}

pub fn default_radius() -> usize {
    PatchMatchConfig::default().patch_radius
}

pub fn noise_image(w: usize, h: usize, c: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..w * h * c).map(|_| rng.random::<f64>()).collect();
    Image::new(w, h, c, data).unwrap()
}
