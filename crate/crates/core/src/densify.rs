//! Densification of the semi-dense plane flow: best-first homography
//! propagation into unfilled pixels, a pluggable sparse-to-dense
//! interpolator, and a per-pixel merge by warped color consistency.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap};
use std::path::PathBuf;

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::homography::HomographyError;
use crate::imgcore::{read_flo_sized, FlowField, FlowIoError, Image};
use crate::multiscale::MergedFlow;
use crate::plane_match::{pixel_loss, PlaneModel};

#[derive(Debug, Error)]
pub enum DensifyError {
    #[error("need at least 4 non-collinear seeds, got {0}")]
    TooFewSeeds(usize),
    #[error("neither flow is valid at pixel ({0}, {1})")]
    CoverageGap(usize, usize),
    #[error("flow is {0}x{1}, expected {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("unknown interpolator {0:?}; available: {1}")]
    UnknownInterpolator(String, String),
    #[error("interpolator {0:?} needs an input file")]
    MissingInput(&'static str),
    #[error(transparent)]
    Flow(#[from] FlowIoError),
    #[error(transparent)]
    Homography(#[from] HomographyError),
}

/// Orders `f64` keys totally so they can sit in a heap.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn neighbors4(i: usize, w: usize, h: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (i % w, i / w);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < w).then(|| i + 1),
        (y > 0).then(|| i - w),
        (y + 1 < h).then(|| i + w),
    ]
    .into_iter()
    .flatten()
}

/// Grows assigned regions into unfilled 4-neighbors, lowest loss first.
///
/// Candidates `(loss, pixel, model)` are popped in increasing order; an
/// unfilled pixel takes the candidate's model when its loss is below
/// `eps`, and its own unfilled neighbors are queued under that model.
/// `models` is indexed by model id.
pub fn propagate_models(
    merged: &MergedFlow,
    models: &[PlaneModel],
    a: &Image,
    b: &Image,
    eps: f64,
) -> Result<MergedFlow, DensifyError> {
    let (w, h) = merged.flow.dims();
    let mut out = merged.clone();
    let mut heap: BinaryHeap<Reverse<(Key, usize, usize)>> = BinaryHeap::new();
    let push = |heap: &mut BinaryHeap<_>, out: &MergedFlow, i: usize, m: usize| {
        for n in neighbors4(i, w, h) {
            if out.model[n].is_none() {
                let l = pixel_loss(a, b, &models[m].h_fwd, n % w, n / w, eps);
                if l < eps {
                    heap.push(Reverse((Key(l), n, m)));
                }
            }
        }
    };
    for i in 0..w * h {
        if let Some(m) = merged.model[i] {
            push(&mut heap, &out, i, m);
        }
    }
    while let Some(Reverse((Key(l), i, m))) = heap.pop() {
        if out.model[i].is_some() {
            continue;
        }
        out.assign(i, &models[m], l)?;
        push(&mut heap, &out, i, m);
    }
    Ok(out)
}

/// Sparse-to-dense flow completion.
pub trait Interpolator: Send + Sync {
    fn name(&self) -> &str;

    /// Dense flow agreeing with `sparse` wherever it is valid.
    fn interpolate(&self, sparse: &FlowField, guide: &Image) -> Result<FlowField, DensifyError>;
}

/// Options every registered interpolator is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatorOptions {
    pub k: usize,
    pub sigma_g: f64,
    pub lambda: f64,
    pub external: Option<PathBuf>,
}

impl Default for InterpolatorOptions {
    fn default() -> Self {
        Self {
            k: 25,
            sigma_g: 20.0,
            lambda: 100.0,
            external: None,
        }
    }
}

type InterpolatorFactory = fn(&InterpolatorOptions) -> Result<Box<dyn Interpolator>, DensifyError>;

/// Interpolators by name.
pub struct InterpolatorRegistry {
    factories: BTreeMap<&'static str, InterpolatorFactory>,
}

impl Default for InterpolatorRegistry {
    fn default() -> Self {
        let mut r = Self {
            factories: BTreeMap::new(),
        };
        r.register("edge-aware", |o| {
            Ok(Box::new(EdgeAwareInterpolator {
                k: o.k,
                sigma_g: o.sigma_g,
                lambda: o.lambda,
            }))
        });
        r.register("external", |o| {
            let path = o.external.clone().ok_or(DensifyError::MissingInput("external"))?;
            Ok(Box::new(ExternalInterpolator { path }))
        });
        r
    }
}

impl InterpolatorRegistry {
    pub fn register(&mut self, name: &'static str, factory: InterpolatorFactory) {
        self.factories.insert(name, factory);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.factories.keys().copied().collect()
    }

    pub fn build(&self, name: &str, opts: &InterpolatorOptions) -> Result<Box<dyn Interpolator>, DensifyError> {
        let f = self
            .factories
            .get(name)
            .ok_or_else(|| DensifyError::UnknownInterpolator(name.to_string(), self.names().join(", ")))?;
        f(opts)
    }
}

/// Locally weighted affine fit over the geodesically nearest seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeAwareInterpolator {
    pub k: usize,
    pub sigma_g: f64,
    pub lambda: f64,
}

impl Default for EdgeAwareInterpolator {
    fn default() -> Self {
        Self {
            k: 25,
            sigma_g: 20.0,
            lambda: 100.0,
        }
    }
}

impl Interpolator for EdgeAwareInterpolator {
    fn name(&self) -> &str {
        "edge-aware"
    }

    fn interpolate(&self, sparse: &FlowField, guide: &Image) -> Result<FlowField, DensifyError> {
        edge_aware_interpolate(sparse, guide, self)
    }
}

/// Dense flow read from a `.flo` file; valid sparse pixels pass through.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalInterpolator {
    pub path: PathBuf,
}

impl Interpolator for ExternalInterpolator {
    fn name(&self) -> &str {
        "external"
    }

    fn interpolate(&self, sparse: &FlowField, _guide: &Image) -> Result<FlowField, DensifyError> {
        let mut out = read_flo_sized(&self.path, sparse.width(), sparse.height())?;
        for (i, v) in sparse.iter_valid() {
            out.set_index(i, v);
        }
        Ok(out)
    }
}

/// Mean over channels of the central-difference gradient magnitude.
fn gradient_magnitude(img: &Image) -> Vec<f64> {
    let (w, h) = img.dims();
    let c = img.channels();
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (xl, xr) = (x.saturating_sub(1), (x + 1).min(w - 1));
            let (yu, yd) = (y.saturating_sub(1), (y + 1).min(h - 1));
            let mut g = 0.0;
            for k in 0..c {
                let gx = (img.get(xr, y, k) - img.get(xl, y, k)) / (xr - xl).max(1) as f64;
                let gy = (img.get(x, yd, k) - img.get(x, yu, k)) / (yd - yu).max(1) as f64;
                g += (gx * gx + gy * gy).sqrt();
            }
            out[y * w + x] = g / c as f64;
        }
    }
    out
}

fn collinear(seeds: &[usize], w: usize) -> bool {
    let p = |i: usize| ((i % w) as f64, (i / w) as f64);
    let (x0, y0) = p(seeds[0]);
    let Some(&s1) = seeds.iter().find(|&&s| p(s) != (x0, y0)) else {
        return true;
    };
    let (x1, y1) = p(s1);
    seeds.iter().all(|&s| {
        let (x, y) = p(s);
        ((x1 - x0) * (y - y0) - (x - x0) * (y1 - y0)).abs() < 1e-12
    })
}

/// For every pixel, its `k` geodesically nearest seeds with distances, by a
/// multi-label Dijkstra: each pixel settles at most `k` distinct seeds.
fn nearest_seeds(seeds: &[usize], cost: &[f64], w: usize, h: usize, k: usize) -> Vec<Vec<(usize, f64)>> {
    let mut settled: Vec<Vec<(usize, f64)>> = vec![Vec::new(); w * h];
    let mut heap: BinaryHeap<Reverse<(Key, usize, usize)>> = BinaryHeap::new();
    for &s in seeds {
        heap.push(Reverse((Key(0.0), s, s)));
    }
    while let Some(Reverse((Key(d), node, seed))) = heap.pop() {
        let list = &mut settled[node];
        if list.len() >= k || list.iter().any(|(s, _)| *s == seed) {
            continue;
        }
        list.push((seed, d));
        for n in neighbors4(node, w, h) {
            if settled[n].len() < k {
                let step = 1.0 + 0.5 * (cost[node] + cost[n]);
                heap.push(Reverse((Key(d + step), n, seed)));
            }
        }
    }
    settled
}

/// Fills invalid pixels of `sparse` from their `k` geodesically nearest
/// valid seeds.
///
/// Geodesic distance runs over the 4-connected grid with step cost
/// `1 + lambda * |grad guide|`. Each query fits `u` and `v` as affine
/// functions of the offset to the query by least squares with weights
/// `exp(-d / sigma_g)` and takes the constant term; a rank-deficient fit
/// falls back to the weighted mean. Valid pixels pass through.
pub fn edge_aware_interpolate(
    sparse: &FlowField,
    guide: &Image,
    params: &EdgeAwareInterpolator,
) -> Result<FlowField, DensifyError> {
    let (w, h) = sparse.dims();
    if guide.dims() != (w, h) {
        return Err(DensifyError::DimensionMismatch(guide.width(), guide.height(), w, h));
    }
    let seeds: Vec<usize> = (0..w * h).filter(|&i| sparse.is_valid(i)).collect();
    if seeds.len() < 4 || collinear(&seeds, w) {
        return Err(DensifyError::TooFewSeeds(seeds.len()));
    }
    let cost: Vec<f64> = gradient_magnitude(guide).iter().map(|g| params.lambda * g).collect();
    let near = nearest_seeds(&seeds, &cost, w, h, params.k.max(1));

    let values: Vec<Vector2<f64>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            if let Some(v) = sparse.get_index(i) {
                return v;
            }
            fit_local_affine(i, &near[i], sparse, w, params.sigma_g)
        })
        .collect();
    let mut out = FlowField::invalid(w, h);
    for (i, v) in values.into_iter().enumerate() {
        out.set_index(i, v);
    }
    Ok(out)
}

fn fit_local_affine(i: usize, near: &[(usize, f64)], sparse: &FlowField, w: usize, sigma: f64) -> Vector2<f64> {
    let d_min = near.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    let (qx, qy) = ((i % w) as f64, (i / w) as f64);
    let mut ata = Matrix3::zeros();
    let mut atu = Vector3::zeros();
    let mut atv = Vector3::zeros();
    let mut wsum = 0.0;
    let mut mean = Vector2::zeros();
    for &(s, d) in near {
        let f = sparse.get_index(s).expect("seeds are valid");
        let wt = (-(d - d_min) / sigma).exp();
        let r = Vector3::new(1.0, (s % w) as f64 - qx, (s / w) as f64 - qy);
        ata += wt * r * r.transpose();
        atu += wt * f.x * r;
        atv += wt * f.y * r;
        wsum += wt;
        mean += wt * f;
    }
    let mean = mean / wsum;
    // Relative pivot threshold on the normal equations.
    let scale = ata.abs().max().max(1e-300);
    match ata.cholesky() {
        Some(ch) if ch.l().diagonal().iter().all(|d| d * d > 1e-10 * scale) => {
            let u = ch.solve(&atu);
            let v = ch.solve(&atv);
            Vector2::new(u[0], v[0])
        }
        _ => mean,
    }
}

/// Per pixel, the valid flow with the lower warped color-consistency
/// error; ties go to `a`.
pub fn merge_by_consistency(a: &FlowField, b: &FlowField, img1: &Image, img2: &Image) -> Result<FlowField, DensifyError> {
    let (w, h) = img1.dims();
    for f in [a, b] {
        if f.dims() != (w, h) {
            return Err(DensifyError::DimensionMismatch(f.width(), f.height(), w, h));
        }
    }
    let mut out = FlowField::invalid(w, h);
    for i in 0..w * h {
        let v = match (a.get_index(i), b.get_index(i)) {
            (Some(u), Some(v)) => {
                let (x, y) = (i % w, i / w);
                if warp_error(img1, img2, x, y, v) < warp_error(img1, img2, x, y, u) {
                    v
                } else {
                    u
                }
            }
            (Some(u), None) => u,
            (None, Some(v)) => v,
            (None, None) => return Err(DensifyError::CoverageGap(i % w, i / w)),
        };
        out.set_index(i, v);
    }
    Ok(out)
}

/// Mean absolute channel difference between `img1(p)` and bilinear
/// `img2(p + v)`; infinite outside `img2`.
pub fn warp_error(img1: &Image, img2: &Image, x: usize, y: usize, v: Vector2<f64>) -> f64 {
    let c = img1.channels();
    let mut s = [0.0f64; 4];
    if !img2.sample_bilinear(x as f64 + v.x, y as f64 + v.y, &mut s[..c]) {
        return f64::INFINITY;
    }
    img1.pixel(x, y).iter().zip(&s[..c]).map(|(p, q)| (p - q).abs()).sum::<f64>() / c as f64
}
