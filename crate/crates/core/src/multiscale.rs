//! Multi-scale orchestration: the window-radius schedule, inter-level NNF
//! seeding from reliable plane matches, restricted PatchMatch refresh, and
//! the cross-level min-loss merge with lower-level priority.

use thiserror::Error;

use crate::homography::HomographyError;
use crate::imgcore::{FlowField, Image};
use crate::occlusion::multiplicity_filter;
use crate::patchmatch::{clamp_offset, compute_nnf, patch_cost, Nnf, PatchMatchConfig, PatchMatchError};
use crate::plane_match::{mix_seed, run_level, LevelConfig, LevelInputs, PlaneAssignment, PlaneModel};

/// Smallest admissible window radius.
pub const MIN_RADIUS: i64 = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MultiscaleError {
    #[error("level {level} would have window radius {radius} < {MIN_RADIUS}")]
    RadiusTooSmall { level: usize, radius: i64 },
    #[error("at least one level is required")]
    NoLevels,
    #[error("images differ: {0}x{1}x{2} vs {3}x{4}x{5}")]
    ImageMismatch(usize, usize, usize, usize, usize, usize),
    #[error(transparent)]
    PatchMatch(#[from] PatchMatchError),
    #[error(transparent)]
    Homography(#[from] HomographyError),
}

/// Per-level replacement of the shared thresholds. Levels are 1-based.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelOverride {
    pub level: usize,
    pub epsilon: Option<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PyramidConfig {
    pub levels: usize,
    pub w_max: usize,
    pub dw: usize,
    /// Thresholds shared by every level; radius and stride are replaced by
    /// the schedule.
    pub level: LevelConfig,
    pub overrides: Vec<LevelOverride>,
    /// Loss bonus per level of priority in the cross-level merge.
    pub beta: f64,
    /// Loss under which an assignment seeds the next level's NNF; `None`
    /// uses half of that level's `epsilon`.
    pub reliability_loss: Option<f64>,
    pub delta_m: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            levels: 2,
            w_max: 40,
            dw: 20,
            level: LevelConfig::default(),
            overrides: Vec::new(),
            beta: 0.005,
            reliability_loss: None,
            delta_m: 0.01,
        }
    }
}

impl PyramidConfig {
    /// Resolved configuration of 1-based level `l`.
    pub fn level_config(&self, l: usize, radius: usize) -> LevelConfig {
        let mut c = LevelConfig {
            window_radius: radius,
            stride: radius,
            ..self.level
        };
        for o in self.overrides.iter().filter(|o| o.level == l) {
            if let Some(e) = o.epsilon {
                c.epsilon = e;
            }
            if let Some(e) = o.eta {
                c.eta = e;
            }
        }
        c
    }
}

/// `[w_max - (l - 1) dw for l in 1..=k]`.
pub fn level_radii(cfg: &PyramidConfig) -> Result<Vec<usize>, MultiscaleError> {
    if cfg.levels == 0 {
        return Err(MultiscaleError::NoLevels);
    }
    (1..=cfg.levels)
        .map(|l| {
            let r = cfg.w_max as i64 - (l as i64 - 1) * cfg.dw as i64;
            if r < MIN_RADIUS {
                Err(MultiscaleError::RadiusTooSmall { level: l, radius: r })
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

/// Pixels assigned with loss below `reliability_loss`.
pub fn reliable_pixels(assignment: &PlaneAssignment, reliability_loss: f64) -> Vec<usize> {
    (0..assignment.model.len())
        .filter(|&i| assignment.model[i].is_some() && assignment.loss[i] < reliability_loss)
        .collect()
}

/// Overwrites the forward NNF at reliable pixels with the rounded model
/// flow and a recomputed patch cost. `models` is indexed by model id.
pub fn propagate_reliable(
    assignment: &PlaneAssignment,
    models: &[PlaneModel],
    nnf: &Nnf,
    a: &Image,
    b: &Image,
    reliability_loss: f64,
    patch_radius: usize,
) -> Nnf {
    let mut out = nnf.clone();
    let w = nnf.width();
    for i in reliable_pixels(assignment, reliability_loss) {
        let (x, y) = (i % w, i / w);
        let h = &models[assignment.model[i].expect("reliable pixels are assigned")].h_fwd;
        let Some(v) = h.flow_at(x as f64, y as f64) else { continue };
        let off = clamp_offset(x, y, [v.x.round() as i32, v.y.round() as i32], b);
        let q = ((x as i64 + off[0] as i64) as usize, (y as i64 + off[1] as i64) as usize);
        out.set(i, off, patch_cost(a, b, (x, y), q, patch_radius));
    }
    out
}

/// Backward counterpart of [`propagate_reliable`]: every reliable pixel
/// `p` writes the rounded inverse-model offset at `q = round(H p)` of the
/// backward NNF. Returns the new NNF and the written second-image pixels.
pub fn propagate_reliable_backward(
    assignment: &PlaneAssignment,
    models: &[PlaneModel],
    nnf_bwd: &Nnf,
    a: &Image,
    b: &Image,
    reliability_loss: f64,
    patch_radius: usize,
) -> (Nnf, Vec<bool>) {
    let mut out = nnf_bwd.clone();
    let (w, h) = nnf_bwd.dims();
    let wa = assignment.width;
    let mut written = vec![false; w * h];
    for i in reliable_pixels(assignment, reliability_loss) {
        let m = &models[assignment.model[i].expect("reliable pixels are assigned")];
        let Some(q) = m.h_fwd.try_apply((i % wa) as f64, (i / wa) as f64) else { continue };
        let (qx, qy) = (q.x.round(), q.y.round());
        if qx < 0.0 || qy < 0.0 || qx >= w as f64 || qy >= h as f64 {
            continue;
        }
        let (qx, qy) = (qx as usize, qy as usize);
        let j = qy * w + qx;
        if written[j] {
            continue;
        }
        let Ok(inv) = m.h_fwd.inverse() else { continue };
        let Some(v) = inv.flow_at(qx as f64, qy as f64) else { continue };
        let off = clamp_offset(qx, qy, [v.x.round() as i32, v.y.round() as i32], a);
        let p = ((qx as i64 + off[0] as i64) as usize, (qy as i64 + off[1] as i64) as usize);
        out.set(j, off, patch_cost(b, a, (qx, qy), p, patch_radius));
        written[j] = true;
    }
    (out, written)
}

/// PatchMatch restricted to unfrozen pixels, seeded with the current NNF.
pub fn refresh_unassigned(
    nnf: &Nnf,
    a: &Image,
    b: &Image,
    frozen: &[bool],
    pm: &PatchMatchConfig,
) -> Result<Nnf, MultiscaleError> {
    if frozen.iter().all(|f| *f) {
        return Ok(nnf.clone());
    }
    Ok(compute_nnf(a, b, pm, Some(frozen), Some(&nnf.to_flow()))?)
}

/// Merged plane flow with per-pixel provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedFlow {
    pub flow: FlowField,
    /// 1-based level of the winning assignment.
    pub level: Vec<Option<usize>>,
    pub model: Vec<Option<usize>>,
    pub loss: Vec<f64>,
}

impl MergedFlow {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            flow: FlowField::invalid(width, height),
            level: vec![None; width * height],
            model: vec![None; width * height],
            loss: vec![f64::INFINITY; width * height],
        }
    }

    pub fn assigned_count(&self) -> usize {
        self.model.iter().filter(|m| m.is_some()).count()
    }

    /// Records `model` at pixel `i` with its exact induced flow.
    pub fn assign(&mut self, i: usize, model: &PlaneModel, loss: f64) -> Result<(), HomographyError> {
        let w = self.flow.width();
        let v = model
            .h_fwd
            .flow_at((i % w) as f64, (i / w) as f64)
            .ok_or(HomographyError::HorizonInRegion)?;
        self.flow.set_index(i, v);
        self.level[i] = Some(model.level);
        self.model[i] = Some(model.id);
        self.loss[i] = loss;
        Ok(())
    }
}

/// Per pixel, the level assignment minimizing `loss - beta (k - l)`; ties go
/// to the lower level. `levels[l - 1]` is level `l`; `models` is indexed by
/// model id.
pub fn merge_levels(
    levels: &[PlaneAssignment],
    models: &[PlaneModel],
    beta: f64,
) -> Result<MergedFlow, MultiscaleError> {
    let Some(first) = levels.first() else {
        return Err(MultiscaleError::NoLevels);
    };
    let (w, h) = (first.width, first.height);
    let k = levels.len();
    let mut out = MergedFlow::empty(w, h);
    for i in 0..w * h {
        let mut best: Option<(f64, usize)> = None;
        for (idx, asg) in levels.iter().enumerate() {
            if asg.model[i].is_none() {
                continue;
            }
            let eff = asg.loss[i] - beta * (k - (idx + 1)) as f64;
            if best.is_none_or(|(b, _)| eff < b) {
                best = Some((eff, idx));
            }
        }
        if let Some((_, idx)) = best {
            let asg = &levels[idx];
            let m = &models[asg.model[i].expect("candidate is assigned")];
            out.assign(i, m, asg.loss[i])?;
        }
    }
    Ok(out)
}

/// Inputs and outputs of one level, kept for dumps and ablations.
#[derive(Debug, Clone)]
pub struct LevelArtifacts {
    pub level: usize,
    pub radius: usize,
    /// Final assignment after the many-to-one cue.
    pub assignment: PlaneAssignment,
    pub demoted: Vec<usize>,
    pub nnf_fwd: Nnf,
    pub nnf_bwd: Nnf,
}

#[derive(Debug, Clone)]
pub struct MsgpmOutput {
    pub merged: MergedFlow,
    pub levels: Vec<LevelArtifacts>,
    /// Every detected model; `models[k].id == k`.
    pub models: Vec<PlaneModel>,
}

/// Runs all levels on precomputed forward and backward NNFs.
pub fn run_msgpm_with_nnfs(
    a: &Image,
    b: &Image,
    cfg: &PyramidConfig,
    pm: &PatchMatchConfig,
    nnf_fwd: Nnf,
    nnf_bwd: Nnf,
    seed: u64,
) -> Result<MsgpmOutput, MultiscaleError> {
    if a.dims() != b.dims() || a.channels() != b.channels() {
        return Err(MultiscaleError::ImageMismatch(
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels(),
        ));
    }
    let radii = level_radii(cfg)?;
    let mut models: Vec<PlaneModel> = Vec::new();
    let mut levels = Vec::with_capacity(radii.len());
    let (mut fwd, mut bwd) = (nnf_fwd, nnf_bwd);
    for (idx, &radius) in radii.iter().enumerate() {
        let l = idx + 1;
        let lc = cfg.level_config(l, radius);
        let inputs = LevelInputs {
            a,
            b,
            nnf_fwd: &fwd,
            nnf_bwd: &bwd,
        };
        let id_base = models.len();
        let (mut assignment, mut level_models) = run_level(&inputs, &lc, l, id_base, mix_seed(seed, &[10, l as u64]));
        let demoted = multiplicity_filter(&mut assignment, &mut level_models, id_base, cfg.delta_m);
        models.extend(level_models);

        let (next_fwd, next_bwd) = if l < radii.len() {
            let rel = cfg.reliability_loss.unwrap_or(lc.epsilon / 2.0);
            let r = pm.patch_radius;
            let f = propagate_reliable(&assignment, &models, &fwd, a, b, rel, r);
            let (g, written) = propagate_reliable_backward(&assignment, &models, &bwd, a, b, rel, r);
            let frozen_fwd: Vec<bool> = {
                let mut m = vec![false; assignment.model.len()];
                for i in reliable_pixels(&assignment, rel) {
                    m[i] = true;
                }
                m
            };
            let pm_f = PatchMatchConfig {
                rng_seed: mix_seed(pm.rng_seed, &[20, l as u64]),
                ..*pm
            };
            let pm_b = PatchMatchConfig {
                rng_seed: mix_seed(pm.rng_seed, &[21, l as u64]),
                ..*pm
            };
            let (rf, rb) = rayon::join(
                || refresh_unassigned(&f, a, b, &frozen_fwd, &pm_f),
                || refresh_unassigned(&g, b, a, &written, &pm_b),
            );
            (Some(rf?), Some(rb?))
        } else {
            (None, None)
        };
        levels.push(LevelArtifacts {
            level: l,
            radius,
            assignment,
            demoted,
            nnf_fwd: fwd.clone(),
            nnf_bwd: bwd.clone(),
        });
        if let (Some(f), Some(g)) = (next_fwd, next_bwd) {
            fwd = f;
            bwd = g;
        }
    }
    let assignments: Vec<PlaneAssignment> = levels.iter().map(|l| l.assignment.clone()).collect();
    let merged = merge_levels(&assignments, &models, cfg.beta)?;
    Ok(MsgpmOutput { merged, levels, models })
}

/// Forward and backward NNFs of a pair, computed concurrently.
pub fn initial_nnfs(a: &Image, b: &Image, pm: &PatchMatchConfig) -> Result<(Nnf, Nnf), PatchMatchError> {
    let pm_b = PatchMatchConfig {
        rng_seed: mix_seed(pm.rng_seed, &[1]),
        ..*pm
    };
    let (f, g) = rayon::join(|| compute_nnf(a, b, pm, None, None), || compute_nnf(b, a, &pm_b, None, None));
    Ok((f?, g?))
}

/// Full multi-scale plane matching from scratch.
pub fn run_msgpm(
    a: &Image,
    b: &Image,
    cfg: &PyramidConfig,
    pm: &PatchMatchConfig,
    seed: u64,
) -> Result<MsgpmOutput, MultiscaleError> {
    let (f, g) = initial_nnfs(a, b, pm)?;
    run_msgpm_with_nnfs(a, b, cfg, pm, f, g, seed)
}
