//! Multi-scale generalized plane matching for optical flow.
//!
//! The pipeline starts from a PatchMatch nearest-neighbor field, detects
//! per-window homography plane models by RANSAC consensus, validates them by
//! color consistency after plane-distortion compensation, and merges the
//! per-window plane flows across several window scales. Pixels conforming to
//! no plane model are occlusion candidates; the semi-dense result is filled by
//! homography propagation and an edge-aware interpolator.

pub mod densify;
pub mod homography;
pub mod imgcore;
pub mod multiscale;
pub mod occlusion;
pub mod patchmatch;
pub mod pipeline;
pub mod plane_match;
pub mod preprocess;
pub mod synth;

pub use imgcore::{FlowField, Image, OcclusionMask};
