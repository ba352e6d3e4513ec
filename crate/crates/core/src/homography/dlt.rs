//! Normalized direct linear transform.

use nalgebra::{DMatrix, Matrix3, Point2};

use super::{Homography, HomographyError, PointPair};

// Smallest-to-largest retained singular value ratio below which the design
// matrix is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;
// Triangle area (in normalized coordinates, mean radius sqrt 2) below which
// three of four minimal points count as collinear.
const COLLINEAR_AREA: f64 = 1e-6;

/// Similarity that moves the centroid to the origin and scales the mean
/// distance from it to `sqrt(2)`.
fn normalizing_transform(points: impl Iterator<Item = Point2<f64>> + Clone) -> Option<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean_dist = points
        .map(|p| ((p.x - cx).powi(2) + (p.y - cy).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 1e-12) {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    Point2::new(
        t[(0, 0)] * p.x + t[(0, 2)],
        t[(1, 1)] * p.y + t[(1, 2)],
    )
}

pub(crate) fn triangle_area(a: &Point2<f64>, b: &Point2<f64>, c: &Point2<f64>) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y)).abs()
}

fn has_collinear_triple(pts: &[Point2<f64>], min_area: f64) -> bool {
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            for k in j + 1..pts.len() {
                if triangle_area(&pts[i], &pts[j], &pts[k]) < min_area {
                    return true;
                }
            }
        }
    }
    false
}

/// Least-squares homography from at least four correspondences by the
/// normalized DLT.
///
/// Both point sets are translated to their centroids and scaled to mean
/// distance `sqrt(2)`, the `2n x 9` homogeneous system is solved by SVD and
/// the result is denormalized. Four non-degenerate pairs are interpolated
/// exactly.
pub fn fit_dlt(pairs: &[PointPair]) -> Result<Homography, HomographyError> {
    let n = pairs.len();
    if n < 4 {
        return Err(HomographyError::TooFewPairs(n));
    }
    let t_src = normalizing_transform(pairs.iter().map(|p| p.0)).ok_or(HomographyError::Degenerate)?;
    let t_dst = normalizing_transform(pairs.iter().map(|p| p.1)).ok_or(HomographyError::Degenerate)?;
    let src: Vec<Point2<f64>> = pairs.iter().map(|p| transform(&t_src, &p.0)).collect();
    let dst: Vec<Point2<f64>> = pairs.iter().map(|p| transform(&t_dst, &p.1)).collect();

    if n == 4 && (has_collinear_triple(&src, COLLINEAR_AREA) || has_collinear_triple(&dst, COLLINEAR_AREA)) {
        return Err(HomographyError::Degenerate);
    }

    // Pad with zero rows so the SVD yields the full 9-dimensional right basis.
    let rows = (2 * n).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, (s, d)) in src.iter().zip(&dst).enumerate() {
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r0 = 2 * i;
        let r1 = r0 + 1;
        a[(r0, 0)] = -x;
        a[(r0, 1)] = -y;
        a[(r0, 2)] = -1.0;
        a[(r0, 6)] = u * x;
        a[(r0, 7)] = u * y;
        a[(r0, 8)] = u;
        a[(r1, 3)] = -x;
        a[(r1, 4)] = -y;
        a[(r1, 5)] = -1.0;
        a[(r1, 6)] = v * x;
        a[(r1, 7)] = v * y;
        a[(r1, 8)] = v;
    }

    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(HomographyError::Degenerate)?;
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].total_cmp(&sv[i]));
    let largest = sv[order[0]];
    let second_smallest = sv[order[7]];
    if !(largest > 0.0) || second_smallest / largest < RANK_TOL {
        return Err(HomographyError::Degenerate);
    }
    let h = v_t.row(order[8]);
    let h_norm = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);

    let t_dst_inv = t_dst.try_inverse().ok_or(HomographyError::Degenerate)?;
    let m = t_dst_inv * h_norm * t_src;
    Homography::from_matrix(m).map_err(|_| HomographyError::Degenerate)
}
