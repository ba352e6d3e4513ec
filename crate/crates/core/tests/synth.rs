mod common;

use common::*;
use msgpm::homography::Homography;
use msgpm::synth::{fixture_by_name, make_plane_scene, rect, SceneSpec, SynthError, FIXTURES};
use nalgebra::Point2;

/// Even-odd point-in-polygon, written independently of the generator.
fn inside(poly: &[Point2<f64>], p: Point2<f64>) -> bool {
    let mut c = false;
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + n - 1) % n]);
        if (a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x {
            c = !c;
        }
    }
    c
}

/// Occlusion from forward-projected polygons: a pixel is occluded when its
/// target leaves the frame or lands inside the image of a nearer region.
fn occlusion_oracle(spec: &SceneSpec, owner: &[usize]) -> Vec<bool> {
    let (w, h) = (spec.width, spec.height);
    let projected: Vec<Vec<Point2<f64>>> = spec
        .regions
        .iter()
        .map(|r| r.polygon.iter().map(|&p| r.h.apply(p).unwrap()).collect())
        .collect();
    (0..w * h)
        .map(|i| {
            let k = owner[i];
            let p = Point2::new((i % w) as f64, (i / w) as f64);
            let q = spec.regions[k].h.apply(p).unwrap();
            let out = q.x < -1e-9 || q.y < -1e-9 || q.x > (w - 1) as f64 + 1e-9 || q.y > (h - 1) as f64 + 1e-9;
            out || (0..spec.regions.len()).any(|j| spec.regions[j].depth < spec.regions[k].depth && inside(&projected[j], q))
        })
        .collect()
}

fn bilinear(img: &msgpm::imgcore::Image, x: f64, y: f64, c: usize) -> f64 {
    let x = x.clamp(0.0, (img.width() - 1) as f64);
    let y = y.clamp(0.0, (img.height() - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(img.width() - 1), (y0 + 1).min(img.height() - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
    let bot = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
    top * (1.0 - fy) + bot * fy
}

#[test]
fn fixtures_warp_back_and_agree_with_the_occlusion_oracle() {
    for name in FIXTURES.iter().filter(|n| **n != "brightness") {
        for seed in [0, 7] {
            let spec = fixture_by_name(name, seed).unwrap();
            let scene = make_plane_scene(&spec).unwrap();
            let (w, h) = (spec.width, spec.height);

            // Flow is the owner's homography displacement.
            for i in (0..w * h).step_by(37) {
                let p = Point2::new((i % w) as f64, (i / w) as f64);
                let q = spec.regions[scene.owner[i]].h.apply(p).unwrap();
                let v = scene.flow.get_index(i).unwrap();
                assert!((v.x - (q.x - p.x)).abs() < 1e-9 && (v.y - (q.y - p.y)).abs() < 1e-9);
            }

            let mut sum = 0.0;
            let mut n = 0usize;
            for i in 0..w * h {
                if scene.occlusion.is_occluded(i) {
                    continue;
                }
                let (x, y) = (i % w, i / w);
                let v = scene.flow.get_index(i).unwrap();
                for c in 0..3 {
                    sum += (scene.img1.get(x, y, c) - bilinear(&scene.img2, x as f64 + v.x, y as f64 + v.y, c)).abs();
                }
                n += 3;
            }
            let residual = sum / n as f64;
            assert!(residual < 0.02, "{name} seed {seed}: warp-back residual {residual}");

            let oracle = occlusion_oracle(&spec, &scene.owner);
            let disagree = (0..w * h).filter(|&i| oracle[i] != scene.occlusion.is_occluded(i)).count();
            assert!(
                (disagree as f64) < 0.01 * (w * h) as f64,
                "{name} seed {seed}: {disagree} occlusion disagreements"
            );
        }
    }
}

#[test]
fn two_plane_fixture_has_a_real_occlusion_band() {
    let spec = fixture_by_name("two-plane", 0).unwrap();
    let fg = spec.regions[0].h.matrix();
    assert!(fg[(2, 0)].abs() <= 1e-3 && fg[(2, 1)].abs() <= 1e-3);
    let scene = make_plane_scene(&spec).unwrap();
    let (w, h) = (spec.width, spec.height);
    // Relative displacement of the foreground against the background.
    let centre = Point2::new(120.0, 130.0);
    let d = spec.regions[0].h.apply(centre).unwrap() - spec.regions[1].h.apply(centre).unwrap();
    assert!((8.0..=15.0).contains(&d.norm()), "relative displacement {}", d.norm());
    let band = (0..w * h).filter(|&i| scene.occlusion.is_occluded(i) && scene.owner[i] == 1).count();
    assert!(band > 500, "band of {band} pixels");
}

#[test]
fn generation_is_deterministic_per_seed() {
    let a = make_plane_scene(&fixture_by_name("small-plane", 3).unwrap()).unwrap();
    let b = make_plane_scene(&fixture_by_name("small-plane", 3).unwrap()).unwrap();
    assert_eq!(a.img1.to_bytes(), b.img1.to_bytes());
    assert_eq!(a.img2.to_bytes(), b.img2.to_bytes());
    assert_eq!(a.flow.to_flo_bytes(), b.flow.to_flo_bytes());
    assert_eq!(a.occlusion, b.occlusion);
    let c = make_plane_scene(&fixture_by_name("small-plane", 4).unwrap()).unwrap();
    assert_ne!(a.img1.to_bytes(), c.img1.to_bytes());
}

#[test]
fn brightness_fixture_only_changes_the_second_frame() {
    let plain = make_plane_scene(&fixture_by_name("two-plane", 1).unwrap()).unwrap();
    let bright = make_plane_scene(&fixture_by_name("brightness", 1).unwrap()).unwrap();
    assert_eq!(plain.img1, bright.img1);
    assert_eq!(plain.flow, bright.flow);
    let mean = |img: &msgpm::imgcore::Image| img.data().iter().sum::<f64>() / img.data().len() as f64;
    assert!(mean(&bright.img2) > mean(&plain.img2) + 0.1);
}

#[test]
fn bad_specs_are_rejected() {
    assert!(matches!(fixture_by_name("nope", 0), Err(SynthError::UnknownFixture(_))));
    let empty = spec(8, 8, vec![], 0);
    assert!(matches!(make_plane_scene(&empty), Err(SynthError::Empty)));
    let gap = spec(8, 8, vec![region(rect(0.0, 0.0, 3.0, 3.0), Homography::identity(), 0, fine_texture([0.5; 3]))], 0);
    assert!(matches!(make_plane_scene(&gap), Err(SynthError::Uncovered(_, _))));
    let flat = spec(8, 8, vec![region(vec![Point2::new(0.0, 0.0), Point2::new(1.0, 1.0), Point2::new(2.0, 2.0)], Homography::identity(), 0, fine_texture([0.5; 3]))], 0);
    assert!(matches!(make_plane_scene(&flat), Err(SynthError::DegeneratePolygon(0))));
    let horizon = Homography::from_row_major([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -0.2, 0.0, 1.0]).unwrap();
    let bad = spec(8, 8, vec![full_frame(8, 8, horizon, fine_texture([0.5; 3]))], 0);
    assert!(matches!(make_plane_scene(&bad), Err(SynthError::HorizonInFrame(0))));
}
