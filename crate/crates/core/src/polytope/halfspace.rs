use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Polytope `{ f | A f ≤ d }` with unit-norm rows of `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfspacePolytope {
    pub normals: DMatrix<f64>,
    pub offsets: DVector<f64>,
}

impl HalfspacePolytope {
    /// Builds the polytope, normalising each row. Zero rows are rejected.
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>) -> Result<Self> {
        if normals.nrows() != offsets.len() {
            return Err(Error::PolytopePrecompute("row count mismatch between normals and offsets".into()));
        }
        let mut normals = normals;
        let mut offsets = offsets;
        for r in 0..normals.nrows() {
            let n = normals.row(r).norm();
            if n < 1e-300 {
                return Err(Error::PolytopePrecompute(format!("facet {r} has a zero normal")));
            }
            normals.row_mut(r).unscale_mut(n);
            offsets[r] /= n;
        }
        Ok(HalfspacePolytope { normals, offsets })
    }

    pub fn facet_count(&self) -> usize {
        self.offsets.len()
    }

    pub fn dim(&self) -> usize {
        self.normals.ncols()
    }

    /// `A f − d`, non-positive rowwise for members.
    pub fn residual(&self, f: &DVector<f64>) -> DVector<f64> {
        &self.normals * f - &self.offsets
    }

    pub fn contains(&self, f: &DVector<f64>, tol: f64) -> bool {
        self.residual(f).iter().all(|r| *r <= tol)
    }

    /// Angle `atan2(n_z, n_x)` of each row (planar polytopes only).
    pub fn angles(&self) -> Vec<f64> {
        (0..self.facet_count()).map(|r| self.normals[(r, 1)].atan2(self.normals[(r, 0)])).collect()
    }

    /// Rows reordered by normal angle in `[-π, π)`.
    pub fn sorted_by_angle(&self) -> HalfspacePolytope {
        let angles = self.angles();
        let mut idx: Vec<usize> = (0..self.facet_count()).collect();
        idx.sort_by(|a, b| angles[*a].total_cmp(&angles[*b]));
        self.permuted(&idx)
    }

    pub fn permuted(&self, order: &[usize]) -> HalfspacePolytope {
        let normals = DMatrix::from_fn(order.len(), self.dim(), |r, c| self.normals[(order[r], c)]);
        let offsets = DVector::from_fn(order.len(), |r, _| self.offsets[order[r]]);
        HalfspacePolytope { normals, offsets }
    }
}

/// Row-by-row difference between two planar polytopes, rows matched by
/// nearest normal angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolytopeDeviation {
    /// Largest angle between matched normals, rad.
    pub max_angle: f64,
    /// Largest `|d − d_ref| / |d_ref|`.
    pub max_offset_rel: f64,
    /// Largest absolute entry difference of matched `[n, d]` rows.
    pub max_row_error: f64,
}

impl HalfspacePolytope {
    /// Deviation of `self` from `reference`. Fails when the facet counts or
    /// dimensions differ, or when two rows match the same reference row.
    pub fn deviation(&self, reference: &HalfspacePolytope) -> Result<PolytopeDeviation> {
        if self.facet_count() != reference.facet_count() || self.dim() != 2 || reference.dim() != 2 {
            return Err(Error::PolytopePrecompute(format!(
                "cannot compare polytopes with {} and {} facets",
                self.facet_count(),
                reference.facet_count()
            )));
        }
        let (a, b) = (self.angles(), reference.angles());
        let wrap = |x: f64| (x + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
        let mut used = vec![false; b.len()];
        let mut dev = PolytopeDeviation { max_angle: 0.0, max_offset_rel: 0.0, max_row_error: 0.0 };
        for (r, ar) in a.iter().enumerate() {
            let (j, gap) = b
                .iter()
                .enumerate()
                .map(|(j, bj)| (j, wrap(ar - bj).abs()))
                .min_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty");
            if used[j] {
                return Err(Error::PolytopePrecompute(format!("rows {r} and another both match reference row {j}")));
            }
            used[j] = true;
            let (d, dr) = (self.offsets[r], reference.offsets[j]);
            let row = (0..2)
                .map(|c| (self.normals[(r, c)] - reference.normals[(j, c)]).abs())
                .fold((d - dr).abs(), f64::max);
            dev.max_angle = dev.max_angle.max(gap);
            dev.max_offset_rel = dev.max_offset_rel.max((d - dr).abs() / dr.abs().max(f64::MIN_POSITIVE));
            dev.max_row_error = dev.max_row_error.max(row);
        }
        Ok(dev)
    }
}

/// Facets of the convex hull of a point set in 2 or 3 dimensions.
///
/// Brute force: a candidate plane through `dim` points is a facet iff every
/// point lies on its non-positive side. Intended for the small vertex sets of
/// force polytopes (2^n_d points).
pub fn hull_halfspaces(points: &[DVector<f64>]) -> Result<HalfspacePolytope> {
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    if !(dim == 2 || dim == 3) || points.len() <= dim {
        return Err(Error::PolytopePrecompute(format!("hull needs > {dim} points in 2-D or 3-D")));
    }
    let scale = points.iter().map(|p| p.amax()).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-10 * scale;
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let push = |n: DVector<f64>, p: &DVector<f64>, rows: &mut Vec<(DVector<f64>, f64)>| {
        let len = n.norm();
        if len <= 1e-12 * scale.powi(dim as i32 - 1) {
            return;
        }
        let mut n = n / len;
        let mut d = n.dot(p);
        let side: Vec<f64> = points.iter().map(|q| n.dot(q) - d).collect();
        let (min, max) = side.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
        if max > tol && min < -tol {
            return;
        }
        if max > tol {
            n = -n;
            d = -d;
        }
        if !rows.iter().any(|(m, e)| (m - &n).amax() < 1e-9 && (e - d).abs() < tol) {
            rows.push((n, d));
        }
    };
    let count = points.len();
    for i in 0..count {
        for j in (i + 1)..count {
            let e1 = &points[j] - &points[i];
            if dim == 2 {
                push(DVector::from_vec(vec![e1[1], -e1[0]]), &points[i], &mut rows);
                continue;
            }
            for k in (j + 1)..count {
                let e2 = &points[k] - &points[i];
                let n = DVector::from_vec(vec![
                    e1[1] * e2[2] - e1[2] * e2[1],
                    e1[2] * e2[0] - e1[0] * e2[2],
                    e1[0] * e2[1] - e1[1] * e2[0],
                ]);
                push(n, &points[i], &mut rows);
            }
        }
    }
    if rows.len() <= dim {
        return Err(Error::PolytopePrecompute("degenerate vertex set (hull has empty interior)".into()));
    }
    let normals = DMatrix::from_fn(rows.len(), dim, |r, c| rows[r].0[c]);
    let offsets = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    HalfspacePolytope::new(normals, offsets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn deviation_ignores_row_order() {
        let sq = HalfspacePolytope::new(DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0]), v(&[1.0, 2.0, 1.0, 2.0])).unwrap();
        let shuffled = sq.permuted(&[2, 0, 3, 1]);
        assert_eq!(shuffled.deviation(&sq).unwrap().max_row_error, 0.0);
        let mut bigger = sq.clone();
        bigger.offsets[1] = 2.5;
        let d = bigger.deviation(&sq).unwrap();
        assert_eq!(d.max_angle, 0.0);
        assert!((d.max_offset_rel - 0.25).abs() < 1e-15);
        assert!(sq.deviation(&sq.permuted(&[0, 1, 2])).is_err());
    }

    #[test]
    fn square_hull() {
        let pts = vec![v(&[1.0, 1.0]), v(&[-1.0, 1.0]), v(&[-1.0, -1.0]), v(&[1.0, -1.0]), v(&[0.0, 0.5])];
        let p = hull_halfspaces(&pts).unwrap().sorted_by_angle();
        assert_eq!(p.facet_count(), 4);
        for r in 0..4 {
            assert!((p.offsets[r] - 1.0).abs() < 1e-12);
        }
        assert!(p.contains(&v(&[0.99, -0.99]), 0.0));
        assert!(!p.contains(&v(&[1.01, 0.0]), 0.0));
    }

    #[test]
    fn cube_hull() {
        let mut pts = Vec::new();
        for s in 0..8 {
            let b = |k: usize| if s >> k & 1 == 1 { 2.0 } else { -2.0 };
            pts.push(v(&[b(0), b(1), b(2)]));
        }
        let p = hull_halfspaces(&pts).unwrap();
        assert_eq!(p.facet_count(), 6);
        assert!(p.offsets.iter().all(|d| (d - 2.0).abs() < 1e-12));
    }

    #[test]
    fn degenerate_hull_rejected() {
        let pts = vec![v(&[0.0, 0.0]), v(&[1.0, 1.0]), v(&[2.0, 2.0])];
        assert!(hull_halfspaces(&pts).is_err());
    }
}
