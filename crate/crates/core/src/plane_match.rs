//! Single-level plane matching: overlapping windows, per-window homography
//! detection from the NNF, color-consistency validation and min-loss
//! assignment of plane flow to conforming pixels.

use nalgebra::Point2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::homography::{ransac_homography, Homography, PointPair, RansacConfig};
use crate::imgcore::Image;
use crate::occlusion::{agreement_check, symmetry_check};
use crate::patchmatch::Nnf;

/// Pixel extent of one sliding window. Bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub id: usize,
    pub cx: usize,
    pub cy: usize,
    pub radius: usize,
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Window {
    fn new(id: usize, cx: usize, cy: usize, radius: usize, width: usize, height: usize) -> Self {
        Self {
            id,
            cx,
            cy,
            radius,
            x0: cx.saturating_sub(radius),
            y0: cy.saturating_sub(radius),
            x1: (cx + radius).min(width - 1),
            y1: (cy + radius).min(height - 1),
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }

    pub fn pixel_count(&self) -> usize {
        (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)
    }

    /// Row-major pixel indices in a raster of the given width.
    pub fn pixels(&self, width: usize) -> impl Iterator<Item = usize> + '_ {
        (self.y0..=self.y1).flat_map(move |y| (self.x0..=self.x1).map(move |x| y * width + x))
    }
}

/// Centers along one axis: start at `radius`, step by `stride`, and clamp
/// the last center so the final window ends on the last pixel.
fn axis_centers(dim: usize, radius: usize, stride: usize) -> Vec<usize> {
    if 2 * radius + 1 >= dim {
        return vec![(dim - 1) / 2];
    }
    let last = dim - 1 - radius;
    let mut centers = Vec::new();
    let mut c = radius;
    loop {
        centers.push(c);
        if c + radius >= dim - 1 {
            break;
        }
        c = (c + stride.max(1)).min(last);
    }
    centers
}

/// Windows of side `2 radius + 1` on a `stride` lattice covering every
/// pixel, in row-major scan order. An image smaller than one window gets a
/// single window clipped to the image.
pub fn window_grid(width: usize, height: usize, radius: usize, stride: usize) -> Vec<Window> {
    let xs = axis_centers(width, radius, stride);
    let ys = axis_centers(height, radius, stride);
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for &cy in &ys {
        for &cx in &xs {
            out.push(Window::new(out.len(), cx, cy, radius, width, height));
        }
    }
    out
}

/// Truncated color-consistency loss of one pixel: `eps` when `H p` leaves
/// `b`, else `min(mean_c |a(p) - b(H p)|, eps)` with bilinear sampling.
#[inline]
pub fn pixel_loss(a: &Image, b: &Image, h: &Homography, x: usize, y: usize, eps: f64) -> f64 {
    let mut sample = [0.0f64; 4];
    let c = a.channels();
    let Some(q) = h.try_apply(x as f64, y as f64) else {
        return eps;
    };
    if !b.sample_bilinear(q.x, q.y, &mut sample[..c]) {
        return eps;
    }
    let ap = a.pixel(x, y);
    let delta = ap.iter().zip(&sample[..c]).map(|(u, v)| (u - v).abs()).sum::<f64>() / c as f64;
    delta.min(eps)
}

/// [`pixel_loss`] over a set of row-major pixel indices.
pub fn color_consistency_loss(a: &Image, b: &Image, h: &Homography, region: &[usize], eps: f64) -> Vec<f64> {
    let w = a.width();
    region.iter().map(|&i| pixel_loss(a, b, h, i % w, i / w, eps)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    First,
    Residual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelStatus {
    Accepted,
    /// Forward/backward projection overlap at most `eta`, or no backward model.
    RejectedSymmetry,
    /// Geometric/photometric inlier IoU below `tau_agree`.
    RejectedAgreement,
}

impl ModelStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelStatus::Accepted => "accepted",
            ModelStatus::RejectedSymmetry => "rejected-symmetry",
            ModelStatus::RejectedAgreement => "rejected-agreement",
        }
    }
}

/// A detected homography plane with its cue values and inlier sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneModel {
    pub id: usize,
    pub h_fwd: Homography,
    pub h_bwd: Option<Homography>,
    pub window: Window,
    pub level: usize,
    pub stage: Stage,
    /// RANSAC inliers as row-major pixel indices of the first image.
    pub geometric_inliers: Vec<usize>,
    /// Pixels with loss below `epsilon`, sorted.
    pub photometric_inliers: Vec<usize>,
    pub symmetry_overlap: f64,
    pub agreement: f64,
    pub mean_inlier_loss: f64,
    /// Pixels later unassigned by the many-to-one cue.
    pub demoted: usize,
    pub status: ModelStatus,
}

/// Per-pixel model assignment of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneAssignment {
    pub width: usize,
    pub height: usize,
    pub level: usize,
    pub model: Vec<Option<usize>>,
    /// Meaningful only where `model` is set.
    pub loss: Vec<f64>,
}

impl PlaneAssignment {
    pub fn new(width: usize, height: usize, level: usize) -> Self {
        Self {
            width,
            height,
            level,
            model: vec![None; width * height],
            loss: vec![f64::INFINITY; width * height],
        }
    }

    pub fn assigned_count(&self) -> usize {
        self.model.iter().filter(|m| m.is_some()).count()
    }

    pub fn is_assigned(&self, i: usize) -> bool {
        self.model[i].is_some()
    }

    pub fn assigned_mask(&self) -> Vec<bool> {
        self.model.iter().map(|m| m.is_some()).collect()
    }

    /// Writes `(model, loss)` unless the pixel already holds a smaller
    /// `(loss, model id)` pair.
    #[inline]
    pub fn offer(&mut self, i: usize, model: usize, loss: f64) {
        let better = match self.model[i] {
            None => true,
            Some(m) => loss < self.loss[i] || (loss == self.loss[i] && model < m),
        };
        if better {
            self.model[i] = Some(model);
            self.loss[i] = loss;
        }
    }

    pub fn unassign(&mut self, i: usize) {
        self.model[i] = None;
        self.loss[i] = f64::INFINITY;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelConfig {
    pub window_radius: usize,
    pub stride: usize,
    pub epsilon: f64,
    pub eta: f64,
    pub tau_agree: f64,
    /// Smallest residual region that stage 2 runs RANSAC on.
    pub residual_min: usize,
    pub residual_passes: usize,
    /// Correspondences per RANSAC call are subsampled to at most this many.
    pub max_pairs: usize,
    pub ransac: RansacConfig,
}

impl Default for LevelConfig {
    fn default() -> Self {
        Self {
            window_radius: 40,
            stride: 40,
            epsilon: 0.04,
            eta: 0.5,
            tau_agree: 0.3,
            residual_min: 64,
            residual_passes: 3,
            max_pairs: 2000,
            ransac: RansacConfig::default(),
        }
    }
}

impl LevelConfig {
    pub fn with_radius(radius: usize) -> Self {
        Self {
            window_radius: radius,
            stride: radius,
            ..Self::default()
        }
    }
}

/// Deterministic 64-bit mix of a base seed with extra words (splitmix64).
pub(crate) fn mix_seed(base: u64, parts: &[u64]) -> u64 {
    let mut z = base;
    for &p in parts {
        z = z.wrapping_add(p.wrapping_add(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

fn subsample<T: Copy>(items: &[T], max: usize, seed: u64) -> Vec<T> {
    if items.len() <= max {
        return items.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, items.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| items[i]).collect()
}

fn nnf_pair(nnf: &Nnf, i: usize) -> PointPair {
    let w = nnf.width();
    let (x, y) = ((i % w) as f64, (i / w) as f64);
    let o = nnf.offset(i);
    (Point2::new(x, y), Point2::new(x + o[0] as f64, y + o[1] as f64))
}

/// Geometric model of a window region before photometric validation.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub h_fwd: Homography,
    pub h_bwd: Option<Homography>,
    pub geometric_inliers: Vec<usize>,
}

/// RANSAC on the forward NNF pairs of `region`, followed by a backward fit
/// on backward-NNF pairs at the rounded projections of the forward inliers.
///
/// The forward inlier set is recomputed over the whole region when the
/// correspondences were subsampled. Models whose horizon crosses the
/// window are discarded.
pub fn detect_plane(
    window: &Window,
    region: &[usize],
    nnf_fwd: &Nnf,
    nnf_bwd: &Nnf,
    cfg: &LevelConfig,
    seed: u64,
) -> Option<Detection> {
    if region.len() < cfg.ransac.min_inliers.max(4) {
        return None;
    }
    let (w, h) = nnf_fwd.dims();
    let ransac_cfg = RansacConfig {
        rng_seed: mix_seed(seed, &[1]),
        min_sample_area: Some(cfg.ransac.min_sample_area.unwrap_or(1e-6 * (w * h) as f64)),
        ..cfg.ransac
    };
    let sample = subsample(region, cfg.max_pairs, mix_seed(seed, &[2]));
    let pairs: Vec<PointPair> = sample.iter().map(|&i| nnf_pair(nnf_fwd, i)).collect();
    let fit = ransac_homography(&pairs, &ransac_cfg)?;
    let h_fwd = fit.model;
    if !h_fwd.is_finite_on_rect(window.x0 as f64, window.y0 as f64, window.x1 as f64, window.y1 as f64) {
        return None;
    }
    let h_inv = h_fwd.inverse().ok()?;
    let geometric_inliers: Vec<usize> = region
        .iter()
        .copied()
        .filter(|&i| {
            crate::homography::symmetric_transfer_error(&h_fwd, &h_inv, &nnf_pair(nnf_fwd, i)) <= cfg.ransac.inlier_px
        })
        .collect();
    if geometric_inliers.len() < cfg.ransac.min_inliers {
        return None;
    }

    let (bw, bh) = nnf_bwd.dims();
    let mut seen = vec![false; bw * bh];
    let mut targets = Vec::new();
    for &i in &geometric_inliers {
        let Some(q) = h_fwd.try_apply((i % w) as f64, (i / w) as f64) else {
            continue;
        };
        let (qx, qy) = (q.x.round(), q.y.round());
        if qx < 0.0 || qy < 0.0 || qx >= bw as f64 || qy >= bh as f64 {
            continue;
        }
        let j = qy as usize * bw + qx as usize;
        if !seen[j] {
            seen[j] = true;
            targets.push(j);
        }
    }
    targets.sort_unstable();
    let targets = subsample(&targets, cfg.max_pairs, mix_seed(seed, &[3]));
    let bwd_pairs: Vec<PointPair> = targets.iter().map(|&j| nnf_pair(nnf_bwd, j)).collect();
    let bwd_cfg = RansacConfig {
        rng_seed: mix_seed(seed, &[4]),
        ..ransac_cfg
    };
    let h_bwd = ransac_homography(&bwd_pairs, &bwd_cfg).map(|r| r.model);
    Some(Detection {
        h_fwd,
        h_bwd,
        geometric_inliers,
    })
}

/// Photometric inliers of a detection over `region` and the two gates.
/// Returns the model (with status set) and the `(pixel, loss)` pairs to
/// assign, empty unless accepted.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_model(
    id: usize,
    det: Detection,
    window: Window,
    level: usize,
    stage: Stage,
    region: &[usize],
    a: &Image,
    b: &Image,
    cfg: &LevelConfig,
) -> (PlaneModel, Vec<(usize, f64)>) {
    let losses = color_consistency_loss(a, b, &det.h_fwd, region, cfg.epsilon);
    let inliers: Vec<(usize, f64)> = region
        .iter()
        .zip(&losses)
        .filter(|(_, l)| **l < cfg.epsilon)
        .map(|(&i, &l)| (i, l))
        .collect();
    let mut photometric: Vec<usize> = inliers.iter().map(|(i, _)| *i).collect();
    photometric.sort_unstable();
    let mean_inlier_loss = if inliers.is_empty() {
        f64::NAN
    } else {
        inliers.iter().map(|(_, l)| l).sum::<f64>() / inliers.len() as f64
    };
    let symmetry_overlap = symmetry_check(&det.h_fwd, det.h_bwd.as_ref(), &photometric, a.width(), a.height());
    let mut geometric = det.geometric_inliers;
    geometric.sort_unstable();
    let agreement = agreement_check(&geometric, &photometric);
    let status = if photometric.is_empty() || symmetry_overlap <= cfg.eta {
        ModelStatus::RejectedSymmetry
    } else if agreement < cfg.tau_agree {
        ModelStatus::RejectedAgreement
    } else {
        ModelStatus::Accepted
    };
    let model = PlaneModel {
        id,
        h_fwd: det.h_fwd,
        h_bwd: det.h_bwd,
        window,
        level,
        stage,
        geometric_inliers: geometric,
        photometric_inliers: photometric,
        symmetry_overlap,
        agreement,
        mean_inlier_loss,
        demoted: 0,
        status,
    };
    let writes = if status == ModelStatus::Accepted { inliers } else { Vec::new() };
    (model, writes)
}

/// Evaluates `det` over `region` and writes accepted inliers into
/// `assignment` by the min-loss rule. Returns the model and the pixels it
/// won.
#[allow(clippy::too_many_arguments)]
pub fn validate_and_assign(
    id: usize,
    det: Detection,
    window: Window,
    stage: Stage,
    region: &[usize],
    a: &Image,
    b: &Image,
    assignment: &mut PlaneAssignment,
    cfg: &LevelConfig,
) -> (PlaneModel, Vec<usize>) {
    let (model, writes) = evaluate_model(id, det, window, assignment.level, stage, region, a, b, cfg);
    for &(i, l) in &writes {
        assignment.offer(i, id, l);
    }
    let won = writes
        .iter()
        .filter(|(i, _)| assignment.model[*i] == Some(id))
        .map(|(i, _)| *i)
        .collect();
    (model, won)
}

/// Inputs shared by every window of one level.
pub struct LevelInputs<'a> {
    pub a: &'a Image,
    pub b: &'a Image,
    pub nnf_fwd: &'a Nnf,
    pub nnf_bwd: &'a Nnf,
}

/// Both stages on one window size. Model ids start at `id_base` and are
/// contiguous, so `models[k].id == id_base + k`.
pub fn run_level(
    inputs: &LevelInputs<'_>,
    cfg: &LevelConfig,
    level: usize,
    id_base: usize,
    seed: u64,
) -> (PlaneAssignment, Vec<PlaneModel>) {
    let (w, h) = inputs.a.dims();
    let windows = window_grid(w, h, cfg.window_radius, cfg.stride);
    let mut assignment = PlaneAssignment::new(w, h, level);

    // Stage 1: windows are independent; merge in scan order.
    let stage1: Vec<Option<(Detection, Vec<usize>)>> = windows
        .par_iter()
        .map(|win| {
            let region: Vec<usize> = win.pixels(w).collect();
            let wseed = mix_seed(seed, &[level as u64, 0, win.id as u64]);
            detect_plane(win, &region, inputs.nnf_fwd, inputs.nnf_bwd, cfg, wseed).map(|d| (d, region))
        })
        .collect();
    let detected: Vec<(Window, Detection, Vec<usize>)> = windows
        .iter()
        .zip(stage1)
        .filter_map(|(win, d)| d.map(|(d, r)| (*win, d, r)))
        .collect();
    let evaluated: Vec<(PlaneModel, Vec<(usize, f64)>)> = detected
        .into_par_iter()
        .enumerate()
        .map(|(k, (win, det, region))| {
            evaluate_model(id_base + k, det, win, level, Stage::First, &region, inputs.a, inputs.b, cfg)
        })
        .collect();
    let mut models = Vec::with_capacity(evaluated.len());
    for (model, writes) in evaluated {
        for (i, l) in writes {
            assignment.offer(i, model.id, l);
        }
        models.push(model);
    }

    // Stage 2: residual regions, sequential.
    let min_region = cfg.residual_min.max(cfg.ransac.min_inliers);
    for win in &windows {
        for pass in 0..cfg.residual_passes {
            let residual: Vec<usize> = win.pixels(w).filter(|&i| !assignment.is_assigned(i)).collect();
            if residual.len() < min_region {
                break;
            }
            let wseed = mix_seed(seed, &[level as u64, 1 + pass as u64, win.id as u64]);
            let Some(det) = detect_plane(win, &residual, inputs.nnf_fwd, inputs.nnf_bwd, cfg, wseed) else {
                break;
            };
            let id = id_base + models.len();
            let (model, won) = validate_and_assign(id, det, *win, Stage::Residual, &residual, inputs.a, inputs.b, &mut assignment, cfg);
            let accepted = model.status == ModelStatus::Accepted && !won.is_empty();
            models.push(model);
            if !accepted {
                break;
            }
        }
    }
    (assignment, models)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::homography::Homography;

    #[test]
    fn grid_examples() {
        let g = window_grid(100, 100, 20, 20);
        let xs: Vec<usize> = g.iter().take_while(|w| w.cy == g[0].cy).map(|w| w.cx).collect();
        assert_eq!(xs, vec![20, 40, 60, 79]);
        assert_eq!(g.len(), 16);

        let g = window_grid(41, 41, 20, 20);
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].x0, g[0].x1), (0, 40));

        // No overlap: stride equals the window side.
        let g = window_grid(30, 10, 2, 5);
        let mut covered = vec![0; 300];
        for w in &g {
            for i in w.pixels(30) {
                covered[i] += 1;
            }
        }
        assert!(covered.iter().all(|c| *c == 1));
    }

    #[test]
    fn small_image_single_clipped_window() {
        let g = window_grid(10, 7, 20, 20);
        assert_eq!(g.len(), 1);
        assert_eq!((g[0].x0, g[0].y0, g[0].x1, g[0].y1), (0, 0, 9, 6));
    }

    #[test]
    fn loss_examples() {
        let a = Image::filled(3, 1, 3, 0.50);
        let b = Image::filled(3, 1, 3, 0.53);
        let l = color_consistency_loss(&a, &b, &Homography::identity(), &[0, 1, 2], 0.05);
        for v in l {
            assert!((v - 0.03).abs() < 1e-9);
        }
        let shifted = Homography::translation(5.0, 0.0);
        assert_eq!(color_consistency_loss(&a, &b, &shifted, &[1], 0.05), vec![0.05]);
        let b = Image::filled(3, 1, 3, 0.9);
        assert_eq!(color_consistency_loss(&a, &b, &Homography::identity(), &[2], 0.05), vec![0.05]);
    }

    #[test]
    fn offer_is_min_loss_then_min_id() {
        let mut asg = PlaneAssignment::new(2, 1, 1);
        asg.offer(0, 3, 0.02);
        asg.offer(0, 5, 0.01);
        assert_eq!((asg.model[0], asg.loss[0]), (Some(5), 0.01));
        asg.offer(0, 4, 0.01);
        assert_eq!(asg.model[0], Some(4));
        asg.offer(0, 9, 0.01);
        assert_eq!(asg.model[0], Some(4));
    }

    #[test]
    fn seed_mix_differs() {
        assert_ne!(mix_seed(1, &[0]), mix_seed(1, &[1]));
        assert_eq!(mix_seed(1, &[2, 3]), mix_seed(1, &[2, 3]));
    }
}
