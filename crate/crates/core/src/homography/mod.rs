//! Planar homographies: the projective model, normalized DLT estimation and
//! RANSAC consensus fitting.

use nalgebra::{Matrix3, Point2, Vector2, Vector3};
use thiserror::Error;

use crate::imgcore::FlowField;

mod dlt;
mod ransac;

pub use self::dlt::fit_dlt;
pub use self::ransac::{ransac_homography, symmetric_transfer_error, RansacConfig, RansacResult};

/// Third homogeneous coordinates below this magnitude are points at infinity.
pub const INFINITY_EPS: f64 = 1e-12;
/// Largest accepted ratio of extreme singular values.
pub const MAX_CONDITION: f64 = 1e10;

/// A correspondence `(source, target)` with `target ~ H source`.
pub type PointPair = (Point2<f64>, Point2<f64>);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HomographyError {
    #[error("point ({0}, {1}) maps to infinity")]
    PointAtInfinity(f64, f64),
    #[error("need at least 4 correspondences, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate point configuration")]
    Degenerate,
    #[error("homography is singular or ill-conditioned")]
    Singular,
    #[error("horizon line crosses the region")]
    HorizonInRegion,
}

/// 3x3 projective transform, stored with unit Frobenius norm and a positive
/// last nonzero entry so equal transforms have equal matrices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    /// Normalizes and validates a raw matrix.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, HomographyError> {
        let norm = m.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(HomographyError::Singular);
        }
        let mut m = m / norm;
        // Row-major order: the last nonzero entry decides the sign.
        let last = (0..9)
            .rev()
            .map(|k| m[(k / 3, k % 3)])
            .find(|v| v.abs() > 1e-15)
            .unwrap_or(1.0);
        if last < 0.0 {
            m = -m;
        }
        let h = Self { m };
        if h.condition_number() > MAX_CONDITION {
            return Err(HomographyError::Singular);
        }
        Ok(h)
    }

    /// Builds from 9 row-major entries.
    pub fn from_row_major(v: [f64; 9]) -> Result<Self, HomographyError> {
        Self::from_matrix(Matrix3::from_row_slice(&v))
    }

    pub fn identity() -> Self {
        Self::from_matrix(Matrix3::identity()).expect("identity is well conditioned")
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        Self::from_matrix(Matrix3::new(1.0, 0.0, tx, 0.0, 1.0, ty, 0.0, 0.0, 1.0))
            .expect("translation is well conditioned")
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Matrix rescaled so that `m[(2,2)] == 1` when that entry is nonzero.
    pub fn matrix_unit_h33(&self) -> Matrix3<f64> {
        let s = self.m[(2, 2)];
        if s.abs() > 1e-15 {
            self.m / s
        } else {
            self.m
        }
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.m[(k / 3, k % 3)];
        }
        out
    }

    pub fn condition_number(&self) -> f64 {
        let sv = self.m.singular_values();
        let max = sv.max();
        let min = sv.min();
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    pub fn inverse(&self) -> Result<Self, HomographyError> {
        let inv = self.m.try_inverse().ok_or(HomographyError::Singular)?;
        Self::from_matrix(inv)
    }

    /// `self` applied after `first`.
    pub fn compose(&self, first: &Homography) -> Result<Self, HomographyError> {
        Self::from_matrix(self.m * first.m)
    }

    /// Projective application with division by the third coordinate.
    #[inline]
    pub fn apply(&self, p: Point2<f64>) -> Result<Point2<f64>, HomographyError> {
        self.try_apply(p.x, p.y)
            .ok_or(HomographyError::PointAtInfinity(p.x, p.y))
    }

    /// Like [`Homography::apply`] on raw coordinates, `None` at infinity.
    #[inline]
    pub fn try_apply(&self, x: f64, y: f64) -> Option<Point2<f64>> {
        let v = self.m * Vector3::new(x, y, 1.0);
        if v.z.abs() < INFINITY_EPS {
            None
        } else {
            Some(Point2::new(v.x / v.z, v.y / v.z))
        }
    }

    /// Displacement `H p - p` at a pixel.
    #[inline]
    pub fn flow_at(&self, x: f64, y: f64) -> Option<Vector2<f64>> {
        self.try_apply(x, y).map(|q| Vector2::new(q.x - x, q.y - y))
    }

    /// Third homogeneous coordinate of `H (x, y, 1)`.
    #[inline]
    fn w_at(&self, x: f64, y: f64) -> f64 {
        self.m[(2, 0)] * x + self.m[(2, 1)] * y + self.m[(2, 2)]
    }

    /// True when the horizon line `w = 0` does not intersect the axis-aligned
    /// rectangle `[x0, x1] x [y0, y1]`. `w` is affine in the point, so the
    /// corners decide.
    pub fn is_finite_on_rect(&self, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
        let ws = [
            self.w_at(x0, y0),
            self.w_at(x1, y0),
            self.w_at(x0, y1),
            self.w_at(x1, y1),
        ];
        ws.iter().all(|w| *w > INFINITY_EPS) || ws.iter().all(|w| *w < -INFINITY_EPS)
    }

    /// Horizon check over a whole `width x height` pixel domain.
    pub fn is_finite_on_image(&self, width: usize, height: usize) -> bool {
        self.is_finite_on_rect(0.0, 0.0, (width.max(1) - 1) as f64, (height.max(1) - 1) as f64)
    }
}

/// Flow `H p - p` on the pixels of `region` (row-major indices into a
/// `width x height` raster); every other pixel is invalid.
pub fn induced_flow(
    h: &Homography,
    width: usize,
    height: usize,
    region: impl IntoIterator<Item = usize>,
) -> Result<FlowField, HomographyError> {
    let mut out = FlowField::invalid(width, height);
    for i in region {
        let (x, y) = ((i % width) as f64, (i / width) as f64);
        let f = h.flow_at(x, y).ok_or(HomographyError::HorizonInRegion)?;
        out.set_index(i, f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apply_examples() {
        let p = Homography::identity().apply(Point2::new(7.5, 3.0)).unwrap();
        assert_eq!(p, Point2::new(7.5, 3.0));

        let p = Homography::translation(2.0, -1.0)
            .apply(Point2::new(0.0, 0.0))
            .unwrap();
        assert!((p - Point2::new(2.0, -1.0)).norm() < 1e-12);

        let h = Homography::from_matrix(Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0))).unwrap();
        let p = h.apply(Point2::new(3.0, 4.0)).unwrap();
        assert!((p - Point2::new(6.0, 8.0)).norm() < 1e-12);
    }

    #[test]
    fn normalization_is_canonical() {
        let a = Homography::from_row_major([2.0, 0.0, 4.0, 0.0, 2.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        let b = Homography::from_row_major([-1.0, 0.0, -2.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0]).unwrap();
        assert!((a.matrix() - b.matrix()).norm() < 1e-15);
        assert!((a.matrix().norm() - 1.0).abs() < 1e-15);
        assert!(a.matrix()[(2, 2)] > 0.0);
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_row_major([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -1.0]).unwrap();
        assert!(matches!(
            h.apply(Point2::new(1.0, 5.0)),
            Err(HomographyError::PointAtInfinity(..))
        ));
    }

    #[test]
    fn singular_rejected() {
        assert_eq!(
            Homography::from_row_major([1.0, 2.0, 3.0, 2.0, 4.0, 6.0, 0.0, 0.0, 1.0]),
            Err(HomographyError::Singular)
        );
        assert_eq!(
            Homography::from_matrix(Matrix3::zeros()),
            Err(HomographyError::Singular)
        );
    }

    #[test]
    fn inverse_round_trip() {
        let h = Homography::from_row_major([1.1, 0.05, 3.0, -0.02, 0.95, -4.0, 1e-4, -2e-4, 1.0]).unwrap();
        let inv = h.inverse().unwrap();
        for &(x, y) in &[(0.0, 0.0), (10.0, 200.0), (255.0, 31.5)] {
            let q = h.apply(Point2::new(x, y)).unwrap();
            let p = inv.apply(q).unwrap();
            assert!((p - Point2::new(x, y)).norm() < 1e-9);
        }
    }

    #[test]
    fn induced_flow_examples() {
        let f = induced_flow(&Homography::identity(), 4, 4, 0..16).unwrap();
        assert!(f.iter_valid().all(|(_, v)| v.norm() < 1e-12));

        let f = induced_flow(&Homography::translation(3.0, 2.0), 4, 4, [5, 6]).unwrap();
        assert!((f.get_index(5).unwrap() - Vector2::new(3.0, 2.0)).norm() < 1e-12);
        assert_eq!(f.get_index(0), None);

        let h = Homography::from_matrix(Matrix3::from_diagonal(&Vector3::new(2.0, 2.0, 1.0))).unwrap();
        let f = induced_flow(&h, 8, 8, [5 * 8 + 5]).unwrap();
        assert!((f.get(5, 5).unwrap() - Vector2::new(5.0, 5.0)).norm() < 1e-12);
    }

    #[test]
    fn horizon_detection() {
        // w = x - 10 vanishes inside a 20 px wide image.
        let h = Homography::from_row_major([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, -10.0]).unwrap();
        assert!(!h.is_finite_on_image(20, 20));
        assert!(h.is_finite_on_rect(11.0, 0.0, 19.0, 19.0));
        assert_eq!(
            induced_flow(&h, 20, 20, [10]),
            Err(HomographyError::HorizonInRegion)
        );
    }
}
