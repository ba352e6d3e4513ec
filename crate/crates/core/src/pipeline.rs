//! End-to-end flow estimation: preprocessing, multi-scale plane matching,
//! model propagation, interpolation, consistency merge and the occlusion
//! mask.

use thiserror::Error;

use crate::densify::{
    merge_by_consistency, propagate_models, DensifyError, InterpolatorOptions, InterpolatorRegistry,
};
use crate::imgcore::{FlowField, Image, ImageError, OcclusionMask};
use crate::multiscale::{initial_nnfs, run_msgpm_with_nnfs, MergedFlow, MsgpmOutput, MultiscaleError, PyramidConfig};
use crate::occlusion::{cue_report, final_occlusion_map, OcclusionConfig};
use crate::patchmatch::{Nnf, PatchMatchConfig, PatchMatchError};
use crate::preprocess::PreprocessorRegistry;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("preprocess: {0}")]
    Preprocess(#[source] ImageError),
    #[error("preprocess: unknown preprocessor {0:?}")]
    UnknownPreprocessor(String),
    #[error("patchmatch: {0}")]
    PatchMatch(#[from] PatchMatchError),
    #[error("multiscale: {0}")]
    Multiscale(#[from] MultiscaleError),
    #[error("densify: {0}")]
    Densify(#[from] DensifyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pyramid: PyramidConfig,
    pub patchmatch: PatchMatchConfig,
    pub theta_occ: f64,
    pub preprocess: String,
    pub interpolator: String,
    pub interp: InterpolatorOptions,
    /// Seeds RANSAC sampling; PatchMatch uses `patchmatch.rng_seed`.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            pyramid: PyramidConfig::default(),
            patchmatch: PatchMatchConfig::default(),
            theta_occ: 0.08,
            preprocess: "none".to_string(),
            interpolator: "edge-aware".to_string(),
            interp: InterpolatorOptions::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn occlusion(&self) -> OcclusionConfig {
        OcclusionConfig {
            eta: self.pyramid.level.eta,
            tau_agree: self.pyramid.level.tau_agree,
            delta_m: self.pyramid.delta_m,
            theta_occ: self.theta_occ,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// The pair after preprocessing.
    pub a: Image,
    pub b: Image,
    pub initial_nnf: (Nnf, Nnf),
    pub msgpm: MsgpmOutput,
    /// Plane flow after homography propagation.
    pub propagated: MergedFlow,
    /// Pixels no plane model reached; forced occluded.
    pub unfilled: Vec<bool>,
    pub interpolated: FlowField,
    pub flow: FlowField,
    pub occlusion: OcclusionMask,
    pub cue_report: String,
}

/// Applies the configured preprocessor to a pair.
pub fn preprocess(a: &Image, b: &Image, name: &str) -> Result<(Image, Image), PipelineError> {
    let p = PreprocessorRegistry::default()
        .get(name)
        .ok_or_else(|| PipelineError::UnknownPreprocessor(name.to_string()))?;
    p.apply(a, b).map_err(PipelineError::Preprocess)
}

/// Runs the whole pipeline. `nnfs` replaces the initial PatchMatch run
/// when given (it must have been computed on the preprocessed pair).
pub fn run_pipeline(
    img1: &Image,
    img2: &Image,
    cfg: &PipelineConfig,
    nnfs: Option<(Nnf, Nnf)>,
) -> Result<PipelineOutput, PipelineError> {
    let (a, b) = preprocess(img1, img2, &cfg.preprocess)?;
    let interpolator = InterpolatorRegistry::default().build(&cfg.interpolator, &cfg.interp)?;
    let (f, g) = match nnfs {
        Some(n) => n,
        None => initial_nnfs(&a, &b, &cfg.patchmatch)?,
    };
    let msgpm = run_msgpm_with_nnfs(&a, &b, &cfg.pyramid, &cfg.patchmatch, f.clone(), g.clone(), cfg.seed)?;
    let propagated = propagate_models(&msgpm.merged, &msgpm.models, &a, &b, cfg.pyramid.level.epsilon)?;
    let unfilled: Vec<bool> = propagated.model.iter().map(|m| m.is_none()).collect();
    let interpolated = interpolator.interpolate(&propagated.flow, &a)?;
    let flow = merge_by_consistency(&propagated.flow, &interpolated, &a, &b)?;
    let occlusion = final_occlusion_map(&flow, &a, &b, cfg.theta_occ, Some(&unfilled));
    let cue_report = cue_report(&msgpm.models, &cfg.occlusion());
    Ok(PipelineOutput {
        a,
        b,
        initial_nnf: (f, g),
        msgpm,
        propagated,
        unfilled,
        interpolated,
        flow,
        occlusion,
        cue_report,
    })
}
