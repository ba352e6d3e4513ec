//! RANSAC consensus fitting of homographies.

use nalgebra::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dlt::{fit_dlt, triangle_area};
use super::{Homography, PointPair};

/// Parameters of [`ransac_homography`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    /// Symmetric reprojection distance threshold in pixels.
    pub inlier_px: f64,
    pub min_inliers: usize,
    pub confidence: f64,
    pub rng_seed: u64,
    /// Absolute triangle area under which a minimal sample is degenerate.
    /// `None` uses `1e-6` times the bounding-box area of the source points.
    pub min_sample_area: Option<f64>,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            inlier_px: 1.5,
            min_inliers: 12,
            confidence: 0.995,
            rng_seed: 0,
            min_sample_area: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RansacResult {
    pub model: Homography,
    /// Sorted indices into the input pairs.
    pub inlier_indices: Vec<usize>,
    pub iterations_used: usize,
}

/// `max(|H p - p'|, |H^-1 p' - p|)`; infinite when either side maps to
/// infinity.
#[inline]
pub fn symmetric_transfer_error(h: &Homography, h_inv: &Homography, pair: &PointPair) -> f64 {
    let (p, q) = pair;
    let fwd = match h.try_apply(p.x, p.y) {
        Some(hp) => (hp - q).norm(),
        None => return f64::INFINITY,
    };
    let bwd = match h_inv.try_apply(q.x, q.y) {
        Some(hq) => (hq - p).norm(),
        None => return f64::INFINITY,
    };
    fwd.max(bwd)
}

struct Score {
    inliers: usize,
    mean_error: f64,
}

impl Score {
    fn better_than(&self, other: &Score) -> bool {
        self.inliers > other.inliers
            || (self.inliers == other.inliers && self.mean_error < other.mean_error)
    }
}

fn score(h: &Homography, pairs: &[PointPair], threshold: f64) -> Option<Score> {
    let h_inv = h.inverse().ok()?;
    let mut inliers = 0;
    let mut sum = 0.0;
    for pair in pairs {
        let e = symmetric_transfer_error(h, &h_inv, pair);
        if e <= threshold {
            inliers += 1;
            sum += e;
        }
    }
    Some(Score {
        inliers,
        mean_error: if inliers > 0 { sum / inliers as f64 } else { f64::INFINITY },
    })
}

fn inlier_set(h: &Homography, pairs: &[PointPair], threshold: f64) -> Vec<usize> {
    let Ok(h_inv) = h.inverse() else {
        return Vec::new();
    };
    pairs
        .iter()
        .enumerate()
        .filter(|(_, pair)| symmetric_transfer_error(h, &h_inv, pair) <= threshold)
        .map(|(i, _)| i)
        .collect()
}

fn adaptive_bound(inlier_ratio: f64, confidence: f64, cap: usize) -> usize {
    let good = inlier_ratio.powi(4);
    if good >= 1.0 - 1e-12 {
        return 1;
    }
    if good <= 0.0 {
        return cap;
    }
    let n = (1.0 - confidence).ln() / (1.0 - good).ln();
    if n.is_finite() {
        (n.ceil().max(1.0) as usize).min(cap)
    } else {
        cap
    }
}

fn sample_is_degenerate(sample: &[PointPair; 4], min_area: f64) -> bool {
    let src = [sample[0].0, sample[1].0, sample[2].0, sample[3].0];
    let dst = [sample[0].1, sample[1].1, sample[2].1, sample[3].1];
    let collinear = |p: &[Point2<f64>; 4]| {
        [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
            .iter()
            .any(|&(a, b, c)| triangle_area(&p[a], &p[b], &p[c]) < min_area)
    };
    collinear(&src) || collinear(&dst)
}

fn bbox_area(pairs: &[PointPair]) -> f64 {
    let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    for (p, _) in pairs {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    ((x1 - x0) * (y1 - y0)).max(0.0)
}

/// Finds the homography with the largest symmetric-reprojection inlier
/// support among random minimal samples.
///
/// Ties in support go to the lower mean inlier error. Sampling stops early
/// once the adaptive bound from the best inlier ratio and `confidence` is
/// reached. The winner is refit on all its inliers and the inlier set is
/// recomputed once; if the refit loses support the sampled model is kept.
/// Returns `None` when the best support is below `min_inliers`.
pub fn ransac_homography(pairs: &[PointPair], cfg: &RansacConfig) -> Option<RansacResult> {
    let n = pairs.len();
    if n < 4 || n < cfg.min_inliers {
        return None;
    }
    let min_area = cfg.min_sample_area.unwrap_or_else(|| 1e-6 * bbox_area(pairs));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut best: Option<(Homography, Score)> = None;
    let mut bound = cfg.max_iterations;
    let mut iterations = 0;

    while iterations < bound {
        iterations += 1;
        let idx = rand::seq::index::sample(&mut rng, n, 4);
        let sample = [pairs[idx.index(0)], pairs[idx.index(1)], pairs[idx.index(2)], pairs[idx.index(3)]];
        if sample_is_degenerate(&sample, min_area) {
            continue;
        }
        let Ok(h) = fit_dlt(&sample) else {
            continue;
        };
        let Some(s) = score(&h, pairs, cfg.inlier_px) else {
            continue;
        };
        if best.as_ref().is_none_or(|(_, b)| s.better_than(b)) {
            bound = adaptive_bound(s.inliers as f64 / n as f64, cfg.confidence, cfg.max_iterations);
            best = Some((h, s));
        }
    }

    let (sampled, sampled_score) = best?;
    if sampled_score.inliers < cfg.min_inliers {
        return None;
    }
    let sampled_inliers = inlier_set(&sampled, pairs, cfg.inlier_px);
    let inlier_pairs: Vec<PointPair> = sampled_inliers.iter().map(|&i| pairs[i]).collect();
    let (model, inlier_indices) = match fit_dlt(&inlier_pairs) {
        Ok(refit) => {
            let refit_inliers = inlier_set(&refit, pairs, cfg.inlier_px);
            if refit_inliers.len() >= sampled_inliers.len() {
                (refit, refit_inliers)
            } else {
                (sampled, sampled_inliers)
            }
        }
        Err(_) => (sampled, sampled_inliers),
    };
    if inlier_indices.len() < cfg.min_inliers {
        return None;
    }
    Some(RansacResult {
        model,
        inlier_indices,
        iterations_used: iterations,
    })
}
