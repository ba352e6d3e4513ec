//! PatchMatch nearest-neighbor fields.
//!
//! Offsets are integer pixel displacements from the first image into the
//! second. Patches are compared by mean absolute difference over the patch
//! and all channels, with out-of-image samples clamped to the border.

use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::imgcore::{FlowField, Image};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatchMatchError {
    #[error("invalid PatchMatch configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("channel mismatch: {0} vs {1}")]
    ChannelMismatch(usize, usize),
    #[error("{what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        what: &'static str,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchMatchConfig {
    pub patch_radius: usize,
    pub iterations: usize,
    pub search_decay: f64,
    pub rng_seed: u64,
}

impl Default for PatchMatchConfig {
    fn default() -> Self {
        Self {
            patch_radius: 3,
            iterations: 5,
            search_decay: 0.5,
            rng_seed: 0,
        }
    }
}

impl PatchMatchConfig {
    pub fn validate(&self) -> Result<(), PatchMatchError> {
        if self.patch_radius < 1 {
            return Err(PatchMatchError::InvalidConfig("patch_radius must be >= 1"));
        }
        if self.iterations < 1 {
            return Err(PatchMatchError::InvalidConfig("iterations must be >= 1"));
        }
        if !(self.search_decay > 0.0 && self.search_decay < 1.0) {
            return Err(PatchMatchError::InvalidConfig("search_decay must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// Dense integer offset field with the patch cost at each stored offset.
#[derive(Debug, Clone, PartialEq)]
pub struct Nnf {
    width: usize,
    height: usize,
    offsets: Vec<[i32; 2]>,
    cost: Vec<f64>,
}

impl Nnf {
    /// Assembles an NNF from raw parts; costs are taken as given.
    pub fn from_parts(width: usize, height: usize, offsets: Vec<[i32; 2]>, cost: Vec<f64>) -> Self {
        assert_eq!(offsets.len(), width * height);
        assert_eq!(cost.len(), width * height);
        Self {
            width,
            height,
            offsets,
            cost,
        }
    }

    /// Rounds a dense flow to integer offsets, clamps targets into `b` and
    /// recomputes every cost.
    pub fn from_flow(flow: &FlowField, a: &Image, b: &Image, radius: usize) -> Result<Self, PatchMatchError> {
        check_inputs(a, b, None, Some(flow))?;
        let (w, h) = a.dims();
        let mut offsets = Vec::with_capacity(w * h);
        let mut cost = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let v = flow.get(x, y).unwrap_or_else(Vector2::zeros);
                let off = clamp_offset(x, y, round_offset(v), b);
                cost.push(patch_cost(a, b, (x, y), target(x, y, off), radius));
                offsets.push(off);
            }
        }
        Ok(Self::from_parts(w, h, offsets, cost))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn offset(&self, i: usize) -> [i32; 2] {
        self.offsets[i]
    }

    #[inline]
    pub fn cost(&self, i: usize) -> f64 {
        self.cost[i]
    }

    pub fn offsets(&self) -> &[[i32; 2]] {
        &self.offsets
    }

    pub fn costs(&self) -> &[f64] {
        &self.cost
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }

    /// Overwrites one entry.
    pub fn set(&mut self, i: usize, offset: [i32; 2], cost: f64) {
        self.offsets[i] = offset;
        self.cost[i] = cost;
    }

    /// Offsets as a dense flow field.
    pub fn to_flow(&self) -> FlowField {
        let mut f = FlowField::invalid(self.width, self.height);
        for (i, o) in self.offsets.iter().enumerate() {
            f.set_index(i, Vector2::new(o[0] as f64, o[1] as f64));
        }
        f
    }
}

#[inline]
fn round_offset(v: Vector2<f64>) -> [i32; 2] {
    [v.x.round() as i32, v.y.round() as i32]
}

/// Moves `p + off` to the nearest pixel of `b`.
#[inline]
pub(crate) fn clamp_offset(x: usize, y: usize, off: [i32; 2], b: &Image) -> [i32; 2] {
    let tx = (x as i64 + off[0] as i64).clamp(0, b.width() as i64 - 1);
    let ty = (y as i64 + off[1] as i64).clamp(0, b.height() as i64 - 1);
    [(tx - x as i64) as i32, (ty - y as i64) as i32]
}

#[inline]
fn target(x: usize, y: usize, off: [i32; 2]) -> (usize, usize) {
    ((x as i64 + off[0] as i64) as usize, (y as i64 + off[1] as i64) as usize)
}

#[inline]
fn in_bounds(x: usize, y: usize, off: [i32; 2], b: &Image) -> bool {
    let tx = x as i64 + off[0] as i64;
    let ty = y as i64 + off[1] as i64;
    tx >= 0 && ty >= 0 && tx < b.width() as i64 && ty < b.height() as i64
}

/// Mean over the `(2r+1)^2` patch of the per-pixel mean absolute channel
/// difference between `a` around `p` and `b` around `q`.
pub fn patch_cost(a: &Image, b: &Image, p: (usize, usize), q: (usize, usize), radius: usize) -> f64 {
    bounded_cost(a, b, p, q, radius, f64::INFINITY).unwrap_or(f64::INFINITY)
}

/// [`patch_cost`] that gives up with `None` as soon as the partial sum proves
/// the result is not below `bound`. Completed results are bit-identical to
/// [`patch_cost`].
fn bounded_cost(
    a: &Image,
    b: &Image,
    p: (usize, usize),
    q: (usize, usize),
    radius: usize,
    bound: f64,
) -> Option<f64> {
    let c = a.channels();
    let r = radius as i64;
    let side = (2 * radius + 1) as f64;
    let norm = side * side * c as f64;
    let limit = bound * norm;
    let (aw, ah, bw, bh) = (a.width() as i64, a.height() as i64, b.width() as i64, b.height() as i64);
    let (ad, bd) = (a.data(), b.data());
    let mut sum = 0.0;
    for dy in -r..=r {
        let ay = (p.1 as i64 + dy).clamp(0, ah - 1);
        let by = (q.1 as i64 + dy).clamp(0, bh - 1);
        let arow = (ay * aw) as usize;
        let brow = (by * bw) as usize;
        for dx in -r..=r {
            let ax = (p.0 as i64 + dx).clamp(0, aw - 1) as usize;
            let bx = (q.0 as i64 + dx).clamp(0, bw - 1) as usize;
            let ai = (arow + ax) * c;
            let bi = (brow + bx) * c;
            for k in 0..c {
                sum += (ad[ai + k] - bd[bi + k]).abs();
            }
        }
        if sum >= limit {
            return None;
        }
    }
    Some(sum / norm)
}

fn check_inputs(
    a: &Image,
    b: &Image,
    mask: Option<&[bool]>,
    seed: Option<&FlowField>,
) -> Result<(), PatchMatchError> {
    if a.channels() != b.channels() {
        return Err(PatchMatchError::ChannelMismatch(a.channels(), b.channels()));
    }
    let (w, h) = a.dims();
    if let Some(m) = mask {
        if m.len() != w * h {
            return Err(PatchMatchError::DimensionMismatch {
                what: "mask",
                got_w: m.len(),
                got_h: 1,
                want_w: w,
                want_h: h,
            });
        }
    }
    if let Some(s) = seed {
        if s.dims() != (w, h) {
            return Err(PatchMatchError::DimensionMismatch {
                what: "seed flow",
                got_w: s.width(),
                got_h: s.height(),
                want_w: w,
                want_h: h,
            });
        }
    }
    Ok(())
}

/// Runs PatchMatch from `a` into `b`.
///
/// Pixels start at the rounded `seed_flow` where it is valid and at a
/// uniformly random target otherwise. Pixels with `mask` set and a valid
/// seed are frozen: they keep the seed offset and only act as propagation
/// sources.
pub fn compute_nnf(
    a: &Image,
    b: &Image,
    cfg: &PatchMatchConfig,
    mask: Option<&[bool]>,
    seed_flow: Option<&FlowField>,
) -> Result<Nnf, PatchMatchError> {
    compute_nnf_traced(a, b, cfg, mask, seed_flow).map(|(nnf, _)| nnf)
}

/// [`compute_nnf`] also returning the total cost after initialization and
/// after every iteration.
pub fn compute_nnf_traced(
    a: &Image,
    b: &Image,
    cfg: &PatchMatchConfig,
    mask: Option<&[bool]>,
    seed_flow: Option<&FlowField>,
) -> Result<(Nnf, Vec<f64>), PatchMatchError> {
    cfg.validate()?;
    check_inputs(a, b, mask, seed_flow)?;
    let (w, h) = a.dims();
    let r = cfg.patch_radius;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);

    let mut offsets = Vec::with_capacity(w * h);
    let mut frozen = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let seeded = seed_flow.and_then(|s| s.get_index(i));
            let off = match seeded {
                Some(v) => clamp_offset(x, y, round_offset(v), b),
                None => {
                    let tx = rng.random_range(0..b.width()) as i32;
                    let ty = rng.random_range(0..b.height()) as i32;
                    [tx - x as i32, ty - y as i32]
                }
            };
            offsets.push(off);
            frozen.push(seeded.is_some() && mask.is_some_and(|m| m[i]));
        }
    }
    let cost: Vec<f64> = offsets
        .iter()
        .enumerate()
        .map(|(i, &off)| {
            let (x, y) = (i % w, i / w);
            patch_cost(a, b, (x, y), target(x, y, off), r)
        })
        .collect();
    let mut nnf = Nnf::from_parts(w, h, offsets, cost);
    let mut trace = vec![nnf.total_cost()];

    let max_radius = a.width().max(a.height()).max(b.width()).max(b.height()) as f64;
    for iter in 0..cfg.iterations {
        let forward = iter % 2 == 0;
        for step in 0..w * h {
            let i = if forward { step } else { w * h - 1 - step };
            if frozen[i] {
                continue;
            }
            let (x, y) = (i % w, i / w);
            let mut best = nnf.offsets[i];
            let mut best_cost = nnf.cost[i];
            let try_candidate = |off: [i32; 2], best: &mut [i32; 2], best_cost: &mut f64| {
                if off == *best || !in_bounds(x, y, off, b) {
                    return;
                }
                if let Some(c) = bounded_cost(a, b, (x, y), target(x, y, off), r, *best_cost) {
                    if c < *best_cost {
                        *best = off;
                        *best_cost = c;
                    }
                }
            };

            // Propagation from the already visited neighbors.
            let neighbors: [Option<usize>; 2] = if forward {
                [(x > 0).then(|| i - 1), (y > 0).then(|| i - w)]
            } else {
                [(x + 1 < w).then(|| i + 1), (y + 1 < h).then(|| i + w)]
            };
            for n in neighbors.into_iter().flatten() {
                try_candidate(nnf.offsets[n], &mut best, &mut best_cost);
            }

            // Random search around the current best with shrinking radius.
            let mut radius = max_radius;
            while radius >= 1.0 {
                let ri = radius as i32;
                let cand = [
                    best[0] + rng.random_range(-ri..=ri),
                    best[1] + rng.random_range(-ri..=ri),
                ];
                let cand = clamp_offset(x, y, cand, b);
                try_candidate(cand, &mut best, &mut best_cost);
                radius *= cfg.search_decay;
            }

            nnf.offsets[i] = best;
            nnf.cost[i] = best_cost;
        }
        trace.push(nnf.total_cost());
    }
    Ok((nnf, trace))
}

/// True iff every offset lands inside `b` and every stored cost matches a
/// recomputation within `1e-6`.
pub fn verify_nnf(nnf: &Nnf, a: &Image, b: &Image, cfg: &PatchMatchConfig) -> bool {
    if nnf.dims() != a.dims() || a.channels() != b.channels() {
        return false;
    }
    let w = nnf.width;
    nnf.offsets.iter().zip(&nnf.cost).enumerate().all(|(i, (&off, &c))| {
        let (x, y) = (i % w, i / w);
        in_bounds(x, y, off, b)
            && (patch_cost(a, b, (x, y), target(x, y, off), cfg.patch_radius) - c).abs() <= 1e-6
    })
}
