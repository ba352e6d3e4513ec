//! Occlusion cues on plane models and the final occlusion mask.
//!
//! Three cues screen accidental plane matches: forward/backward projection
//! symmetry, many-to-one target collisions, and agreement between the
//! geometric and photometric inlier sets. The final mask thresholds the
//! warped color-consistency error of the dense flow.

use std::fmt::Write as _;

use crate::homography::Homography;
use crate::imgcore::{FlowField, Image, OcclusionMask};
use crate::plane_match::{ModelStatus, PlaneAssignment, PlaneModel, Stage};

/// Thresholds of the occlusion cues and the final mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionConfig {
    pub eta: f64,
    pub tau_agree: f64,
    pub delta_m: f64,
    pub theta_occ: f64,
}

impl Default for OcclusionConfig {
    fn default() -> Self {
        Self {
            eta: 0.5,
            tau_agree: 0.3,
            delta_m: 0.01,
            theta_occ: 0.08,
        }
    }
}

#[inline]
fn round_into(p: nalgebra::Point2<f64>, width: usize, height: usize) -> Option<usize> {
    let (x, y) = (p.x.round(), p.y.round());
    if x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
        None
    } else {
        Some(y as usize * width + x as usize)
    }
}

/// Fraction of `fwd_inliers` lying in the back-projection of their forward
/// projection. The projected region is rasterized into the second image by
/// rounding `h_fwd p`; the back-projected region is rasterized in the first
/// image by pulling each pixel through the inverse of `h_bwd`. Both images
/// are `width x height`. An absent or singular backward model scores 0.
pub fn symmetry_check(
    h_fwd: &Homography,
    h_bwd: Option<&Homography>,
    fwd_inliers: &[usize],
    width: usize,
    height: usize,
) -> f64 {
    let Some(pull) = h_bwd.and_then(|h| h.inverse().ok()) else {
        return 0.0;
    };
    if fwd_inliers.is_empty() {
        return 0.0;
    }
    let mut projected = vec![false; width * height];
    for &i in fwd_inliers {
        if let Some(j) = h_fwd
            .try_apply((i % width) as f64, (i / width) as f64)
            .and_then(|q| round_into(q, width, height))
        {
            projected[j] = true;
        }
    }
    let recovered = fwd_inliers
        .iter()
        .filter(|&&i| {
            pull.try_apply((i % width) as f64, (i / width) as f64)
                .and_then(|q| round_into(q, width, height))
                .is_some_and(|j| projected[j])
        })
        .count();
    recovered as f64 / fwd_inliers.len() as f64
}

/// Intersection over union of two sorted, deduplicated index sets; 0 when
/// both are empty.
pub fn agreement_check(geometric: &[usize], photometric: &[usize]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < geometric.len() && j < photometric.len() {
        match geometric[i].cmp(&photometric[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = geometric.len() + photometric.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Many-to-one cue on one level's assignment.
///
/// Every assigned pixel is projected by its model into the second image.
/// Target pixels reached by two or more models are contested; each model's
/// score is the mean assigned loss over its source pixels with contested
/// targets. At a contested target, the source pixels of every model whose
/// score exceeds the lowest competing score by more than `delta_m` are
/// unassigned. `models` is indexed by `id - id_base`. Returns the demoted
/// pixels in increasing order.
pub fn multiplicity_filter(
    assignment: &mut PlaneAssignment,
    models: &mut [PlaneModel],
    id_base: usize,
    delta_m: f64,
) -> Vec<usize> {
    let (w, h) = (assignment.width, assignment.height);
    // (target, model, source)
    let mut hits: Vec<(usize, usize, usize)> = Vec::new();
    for (i, m) in assignment.model.iter().enumerate() {
        let Some(m) = *m else { continue };
        let model = &models[m - id_base];
        if let Some(q) = model.h_fwd.try_apply((i % w) as f64, (i / w) as f64) {
            if let Some(j) = round_into(q, w, h) {
                hits.push((j, m, i));
            }
        }
    }
    hits.sort_unstable();

    let groups: Vec<&[(usize, usize, usize)]> = hits.chunk_by(|x, y| x.0 == y.0).collect();
    let contested = |g: &[(usize, usize, usize)]| g.first().map(|f| f.1) != g.last().map(|l| l.1);

    let mut sum = vec![0.0; models.len()];
    let mut count = vec![0usize; models.len()];
    for g in groups.iter().filter(|g| contested(g)) {
        for &(_, m, i) in g.iter() {
            sum[m - id_base] += assignment.loss[i];
            count[m - id_base] += 1;
        }
    }
    let score = |m: usize| sum[m - id_base] / count[m - id_base] as f64;

    let mut demoted = Vec::new();
    for g in groups.iter().filter(|g| contested(g)) {
        let best = g.iter().map(|&(_, m, _)| score(m)).fold(f64::INFINITY, f64::min);
        for &(_, m, i) in g.iter() {
            if score(m) > best + delta_m {
                demoted.push(i);
            }
        }
    }
    demoted.sort_unstable();
    demoted.dedup();
    for &i in &demoted {
        if let Some(m) = assignment.model[i] {
            models[m - id_base].demoted += 1;
        }
        assignment.unassign(i);
    }
    demoted
}

/// Occlusion mask of a dense flow: a pixel is occluded when `p + flow(p)`
/// leaves the second image or the mean absolute channel difference between
/// `a(p)` and bilinear `b(p + flow(p))` exceeds `theta_occ`. Pixels flagged
/// in `forced` are occluded regardless; invalid flow counts as occluded.
pub fn final_occlusion_map(
    flow: &FlowField,
    a: &Image,
    b: &Image,
    theta_occ: f64,
    forced: Option<&[bool]>,
) -> OcclusionMask {
    let (w, h) = a.dims();
    let c = a.channels();
    let mut sample = vec![0.0; c];
    let mut out = OcclusionMask::empty(w, h);
    for i in 0..w * h {
        let occluded = forced.is_some_and(|f| f[i])
            || match flow.get_index(i) {
                None => true,
                Some(v) => {
                    let (x, y) = (i % w, i / w);
                    if b.sample_bilinear(x as f64 + v.x, y as f64 + v.y, &mut sample) {
                        let err = a.pixel(x, y).iter().zip(&sample).map(|(u, s)| (u - s).abs()).sum::<f64>() / c as f64;
                        err > theta_occ
                    } else {
                        true
                    }
                }
            };
        out.set(i, occluded);
    }
    out
}

/// Plain-text table of per-model cue values.
pub fn cue_report(models: &[PlaneModel], cfg: &OcclusionConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# thresholds (configurable defaults, not calibrated): eta={} tau_agree={} delta_m={} theta_occ={}",
        cfg.eta, cfg.tau_agree, cfg.delta_m, cfg.theta_occ
    );
    let _ = writeln!(
        s,
        "# id level stage window cx cy status symmetry agreement mean_loss geometric photometric demoted"
    );
    for m in models {
        let _ = writeln!(
            s,
            "{} {} {} {} {} {} {} {:.6} {:.6} {:.6} {} {} {}",
            m.id,
            m.level,
            match m.stage {
                Stage::First => "first",
                Stage::Residual => "residual",
            },
            m.window.id,
            m.window.cx,
            m.window.cy,
            m.status.as_str(),
            m.symmetry_overlap,
            m.agreement,
            m.mean_inlier_loss,
            m.geometric_inliers.len(),
            m.photometric_inliers.len(),
            m.demoted
        );
    }
    s
}

/// Accepted models only.
pub fn surviving(models: &[PlaneModel]) -> impl Iterator<Item = &PlaneModel> {
    models.iter().filter(|m| m.status == ModelStatus::Accepted)
}
