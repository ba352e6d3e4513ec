//! Endpoint-error metrics, EPE difference maps and occlusion-mask scores.

use super::{FlowField, Image, MetricsError, OcclusionMask};

/// Mean endpoint errors split by occlusion category. Empty categories have
/// a NaN mean and a zero count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpeReport {
    pub epe_all: f64,
    pub epe_nocc: f64,
    pub epe_occ: f64,
    pub count_all: usize,
    pub count_nocc: usize,
    pub count_occ: usize,
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// Per-pixel Euclidean endpoint error. Pixels invalid in `flow` count as
/// zero displacement; `gt` must be dense.
pub fn endpoint_errors(flow: &FlowField, gt: &FlowField) -> Result<Vec<f64>, MetricsError> {
    if flow.dims() != gt.dims() {
        return Err(MetricsError::DimensionMismatch {
            expected: gt.dims(),
            got: flow.dims(),
        });
    }
    (0..gt.len())
        .map(|i| {
            let g = gt.get_index(i).ok_or(MetricsError::InvalidGroundTruth(i))?;
            let f = flow.get_index(i).unwrap_or_else(nalgebra::Vector2::zeros);
            Ok((f - g).norm())
        })
        .collect()
}

/// Mean EPE over all, non-occluded and occluded pixels.
pub fn compute_epe(
    flow: &FlowField,
    gt: &FlowField,
    occ: &OcclusionMask,
) -> Result<EpeReport, MetricsError> {
    if occ.dims() != gt.dims() {
        return Err(MetricsError::DimensionMismatch {
            expected: gt.dims(),
            got: occ.dims(),
        });
    }
    let errors = endpoint_errors(flow, gt)?;
    let (mut s_nocc, mut s_occ, mut n_nocc, mut n_occ) = (0.0, 0.0, 0usize, 0usize);
    for (i, e) in errors.iter().enumerate() {
        if occ.is_occluded(i) {
            s_occ += e;
            n_occ += 1;
        } else {
            s_nocc += e;
            n_nocc += 1;
        }
    }
    Ok(EpeReport {
        epe_all: mean(s_nocc + s_occ, n_nocc + n_occ),
        epe_nocc: mean(s_nocc, n_nocc),
        epe_occ: mean(s_occ, n_occ),
        count_all: n_nocc + n_occ,
        count_nocc: n_nocc,
        count_occ: n_occ,
    })
}

/// Category of a per-pixel EPE difference `EPE(a) - EPE(b)`. Differences
/// within the 1 px band use blue shades, larger ones yellow/orange.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiffClass {
    Equal,
    ASlightlyBetter,
    BSlightlyBetter,
    AMuchBetter,
    BMuchBetter,
}

impl DiffClass {
    pub fn classify(diff: f64) -> Self {
        if diff.abs() <= 1e-12 {
            DiffClass::Equal
        } else if diff < -1.0 {
            DiffClass::AMuchBetter
        } else if diff > 1.0 {
            DiffClass::BMuchBetter
        } else if diff < 0.0 {
            DiffClass::ASlightlyBetter
        } else {
            DiffClass::BSlightlyBetter
        }
    }

    pub fn rgb(self) -> [f64; 3] {
        let c = |r: u8, g: u8, b: u8| [r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0];
        match self {
            DiffClass::Equal => c(255, 255, 255),
            DiffClass::ASlightlyBetter => c(173, 216, 230),
            DiffClass::BSlightlyBetter => c(70, 130, 180),
            DiffClass::AMuchBetter => c(255, 140, 0),
            DiffClass::BMuchBetter => c(255, 230, 0),
        }
    }
}

/// Renders `EPE(flow_a) - EPE(flow_b)` per pixel with [`DiffClass`] colors.
pub fn epe_difference_map(
    flow_a: &FlowField,
    flow_b: &FlowField,
    gt: &FlowField,
) -> Result<Image, MetricsError> {
    let ea = endpoint_errors(flow_a, gt)?;
    let eb = endpoint_errors(flow_b, gt)?;
    let w = gt.width();
    Ok(Image::from_fn(gt.width(), gt.height(), 3, |x, y, c| {
        let i = y * w + x;
        DiffClass::classify(ea[i] - eb[i]).rgb()[c]
    }))
}

/// Precision, recall and F1 of a predicted occlusion mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaskScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub true_positives: usize,
    pub predicted: usize,
    pub actual: usize,
}

/// Scores `predicted` against `truth`. With no positives on either side all
/// three scores are 1.
pub fn occlusion_scores(
    predicted: &OcclusionMask,
    truth: &OcclusionMask,
) -> Result<MaskScore, MetricsError> {
    if predicted.dims() != truth.dims() {
        return Err(MetricsError::DimensionMismatch {
            expected: truth.dims(),
            got: predicted.dims(),
        });
    }
    let mut tp = 0;
    let mut pred = 0;
    let mut actual = 0;
    for i in 0..truth.len() {
        let p = predicted.is_occluded(i);
        let t = truth.is_occluded(i);
        tp += (p && t) as usize;
        pred += p as usize;
        actual += t as usize;
    }
    let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, pred);
    let recall = ratio(tp, actual);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(MaskScore {
        precision,
        recall,
        f1,
        true_positives: tp,
        predicted: pred,
        actual,
    })
}
