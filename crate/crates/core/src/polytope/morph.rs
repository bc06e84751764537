//! Configuration-to-polytope morphing.
//!
//! Three polytopes are precomputed at the leg's maximum retraction, nominal
//! and maximum extension distances (leg straight below the hip). For any other
//! foothold the facet normals are obtained by interpolating their angles in
//! the hip-to-foot distance `l` and rotating by the leg tilt `α`; the offsets
//! are interpolated linearly in `l`. Only the foothold is needed, never the
//! joint configuration.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector3};

use super::exact::exact_force_polytope;
use super::halfspace::HalfspacePolytope;
use crate::error::{Error, Result};
use crate::validate::leg::PlanarLeg;

/// Below this hip-to-foot distance the polar chart is undefined.
pub const MIN_FOOT_DISTANCE: f64 = 1e-6;
/// Distance from `l2` inside which the morphing is treated as sitting on its kink.
pub const KINK_BAND: f64 = 1e-9;

/// Foot position in sagittal polar coordinates around the hip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarFootCoord {
    /// Hip-to-foot distance, m.
    pub l: f64,
    /// Tilt from the downward vertical, positive with the foot ahead of the hip.
    pub alpha: f64,
}

pub fn polar_coords(p_base: &Vector3<f64>, hip: &Vector3<f64>) -> Result<PolarFootCoord> {
    let (dx, dz) = (p_base.x - hip.x, p_base.z - hip.z);
    let l = dx.hypot(dz);
    if l < MIN_FOOT_DISTANCE {
        return Err(Error::DegenerateFoot { distance: l });
    }
    Ok(PolarFootCoord { l, alpha: dx.atan2(-dz) })
}

/// Planar rotation by `a` in the (x, z) plane.
pub fn rotation2(a: f64) -> Matrix2<f64> {
    let (s, c) = a.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn rotation2_derivative(a: f64) -> Matrix2<f64> {
    let (s, c) = a.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let w = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if w >= std::f64::consts::PI { w - two_pi } else { w }
}

/// The three reference polytopes of one leg with a common facet ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct PredefinedPolytopes {
    /// `l1 < l2 < l3`: maximum retraction, nominal, maximum extension.
    pub distances: [f64; 3],
    pub polytopes: [HalfspacePolytope; 3],
    /// Facet angles per polytope; row `j` of every polytope describes the same
    /// facet, with angles unwrapped to lie within π of the nominal one.
    pub angles: [Vec<f64>; 3],
}

impl PredefinedPolytopes {
    /// Computes the reference polytopes with the exact oracle at `α = 0`.
    pub fn compute(leg: &PlanarLeg, torque_limits: &[f64], distances: [f64; 3]) -> Result<Self> {
        let [l1, l2, l3] = distances;
        if !(l1 < l2 && l2 < l3) {
            return Err(Error::PolytopePrecompute(format!("distances must satisfy l1 < l2 < l3, got {distances:?}")));
        }
        let exact = |l: f64| -> Result<HalfspacePolytope> {
            let q = leg.ik(&(leg.hip + Vector3::new(0.0, 0.0, -l)))?;
            Ok(exact_force_polytope(&q, leg, torque_limits)?.sorted_by_angle())
        };
        Self::from_polytopes(distances, [exact(l1)?, exact(l2)?, exact(l3)?])
    }

    /// Aligns externally supplied polytopes. Facets are matched to the nominal
    /// polytope by the cyclic shift of the angle-sorted rows that minimises the
    /// total angular distance.
    pub fn from_polytopes(distances: [f64; 3], polytopes: [HalfspacePolytope; 3]) -> Result<Self> {
        let [l1, l2, l3] = distances;
        if !(l1 < l2 && l2 < l3) {
            return Err(Error::PolytopePrecompute(format!("distances must satisfy l1 < l2 < l3, got {distances:?}")));
        }
        let rows = polytopes[1].facet_count();
        if polytopes.iter().any(|p| p.facet_count() != rows || p.dim() != 2) {
            return Err(Error::PolytopePrecompute(format!(
                "reference polytopes must be planar with equal facet counts, got {:?}",
                polytopes.iter().map(|p| p.facet_count()).collect::<Vec<_>>()
            )));
        }
        let nominal = polytopes[1].sorted_by_angle();
        let nominal_angles = nominal.angles();
        let align = |p: &HalfspacePolytope| -> (HalfspacePolytope, Vec<f64>) {
            let sorted = p.sorted_by_angle();
            let ang = sorted.angles();
            let best = (0..rows)
                .min_by(|a, b| {
                    let cost = |shift: usize| -> f64 {
                        (0..rows).map(|j| wrap_angle(ang[(j + shift) % rows] - nominal_angles[j]).abs()).sum()
                    };
                    cost(*a).total_cmp(&cost(*b))
                })
                .unwrap_or(0);
            let order: Vec<usize> = (0..rows).map(|j| (j + best) % rows).collect();
            let aligned = sorted.permuted(&order);
            let unwrapped = (0..rows).map(|j| nominal_angles[j] + wrap_angle(ang[order[j]] - nominal_angles[j])).collect();
            (aligned, unwrapped)
        };
        let (p1, a1) = align(&polytopes[0]);
        let (p3, a3) = align(&polytopes[2]);
        Ok(PredefinedPolytopes { distances, polytopes: [p1, nominal, p3], angles: [a1, nominal_angles, a3] })
    }

    pub fn facet_count(&self) -> usize {
        self.polytopes[1].facet_count()
    }

    pub fn clamp_distance(&self, l: f64) -> f64 {
        l.clamp(self.distances[0], self.distances[2])
    }

    /// Interpolation weight of `l` (clamped) between its neighbours.
    fn weight(&self, l: f64) -> ((usize, usize), f64, f64) {
        let l = self.clamp_distance(l);
        let (a, b) = select_neighbors(l, self);
        let span = self.distances[b] - self.distances[a];
        ((a, b), (l - self.distances[a]) / span, span)
    }
}

/// Indices (0-based) of the two reference polytopes bracketing `l`:
/// `(0, 1)` for `l1 ≤ l ≤ l2`, `(1, 2)` for `l2 < l ≤ l3`. Out-of-range
/// distances are clamped first.
pub fn select_neighbors(l: f64, pre: &PredefinedPolytopes) -> (usize, usize) {
    if pre.clamp_distance(l) <= pre.distances[1] {
        (0, 1)
    } else {
        (1, 2)
    }
}

/// Facet normal `j` at `coord`: geodesic interpolation of the neighbour
/// normals, rotated by the leg tilt.
pub fn morph_normal(coord: &PolarFootCoord, j: usize, pre: &PredefinedPolytopes) -> Vector2<f64> {
    let ((a, b), w, _) = pre.weight(coord.l);
    let theta = w * (pre.angles[b][j] - pre.angles[a][j]) + pre.angles[a][j];
    rotation2(coord.alpha) * Vector2::new(theta.cos(), theta.sin())
}

/// Facet offset `j` at `coord`, linear in `l`.
pub fn morph_offset(coord: &PolarFootCoord, j: usize, pre: &PredefinedPolytopes) -> f64 {
    let ((a, b), w, _) = pre.weight(coord.l);
    let (da, db) = (pre.polytopes[a].offsets[j], pre.polytopes[b].offsets[j]);
    w * (db - da) + da
}

/// Morphed polytope for a base-frame foot position, in the leg's sagittal plane.
pub fn morph_at(p_base: &Vector3<f64>, hip: &Vector3<f64>, pre: &PredefinedPolytopes) -> Result<HalfspacePolytope> {
    let coord = polar_coords(p_base, hip)?;
    Ok(morph_polar(&coord, pre))
}

pub fn morph_polar(coord: &PolarFootCoord, pre: &PredefinedPolytopes) -> HalfspacePolytope {
    let rows = pre.facet_count();
    let mut normals = DMatrix::zeros(rows, 2);
    let mut offsets = DVector::zeros(rows);
    for j in 0..rows {
        let n = morph_normal(coord, j, pre);
        normals[(j, 0)] = n.x;
        normals[(j, 1)] = n.y;
        offsets[j] = morph_offset(coord, j, pre);
    }
    HalfspacePolytope { normals, offsets }
}

/// Analytic derivatives of `g = A(p) f − d(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolytopeJacobian {
    /// `∂g/∂p` for the base-frame foot position, rows × 3.
    pub wrt_foot: DMatrix<f64>,
    /// `∂g/∂f` for the sagittal force `(f_x, f_z)`, equal to `A(p)`.
    pub wrt_force: DMatrix<f64>,
    /// The foot sits on the kink at `l2`; the derivative is one-sided.
    pub at_kink: bool,
}

/// Chain rule through `(l, α)`; see [`PolytopeJacobian`].
pub fn polytope_jacobian(p_base: &Vector3<f64>, hip: &Vector3<f64>, f: &Vector2<f64>, pre: &PredefinedPolytopes) -> Result<PolytopeJacobian> {
    let coord = polar_coords(p_base, hip)?;
    let (dx, dz) = (p_base.x - hip.x, p_base.z - hip.z);
    let l = coord.l;
    let clamped = l < pre.distances[0] || l > pre.distances[2];
    let (dl_dx, dl_dz) = if clamped { (0.0, 0.0) } else { (dx / l, dz / l) };
    let (da_dx, da_dz) = (-dz / (l * l), dx / (l * l));

    let ((a, b), w, span) = pre.weight(l);
    let rot = rotation2(coord.alpha);
    let drot = rotation2_derivative(coord.alpha);
    let rows = pre.facet_count();
    let mut wrt_foot = DMatrix::zeros(rows, 3);
    let mut wrt_force = DMatrix::zeros(rows, 2);
    for j in 0..rows {
        let dtheta = pre.angles[b][j] - pre.angles[a][j];
        let theta = w * dtheta + pre.angles[a][j];
        let u = Vector2::new(theta.cos(), theta.sin());
        let du = Vector2::new(-theta.sin(), theta.cos());
        let dd = pre.polytopes[b].offsets[j] - pre.polytopes[a].offsets[j];
        let dg_dl = (rot * du).dot(f) * dtheta / span - dd / span;
        let dg_da = (drot * u).dot(f);
        wrt_foot[(j, 0)] = dg_dl * dl_dx + dg_da * da_dx;
        wrt_foot[(j, 2)] = dg_dl * dl_dz + dg_da * da_dz;
        let n = rot * u;
        wrt_force[(j, 0)] = n.x;
        wrt_force[(j, 1)] = n.y;
    }
    Ok(PolytopeJacobian { wrt_foot, wrt_force, at_kink: (l - pre.distances[1]).abs() < KINK_BAND })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::leg::{KneeDirection, LegDof};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn oracle() -> (PlanarLeg, PredefinedPolytopes) {
        let leg = PlanarLeg::new(0.35, 0.33, Vector3::zeros(), LegDof::Sagittal, KneeDirection::Backward).unwrap();
        let pre = PredefinedPolytopes::compute(&leg, &[150.0, 150.0], [0.45, 0.55, 0.65]).unwrap();
        (leg, pre)
    }

    #[test]
    fn polar_examples() {
        let c = polar_coords(&Vector3::new(0.0, 0.1, -0.58), &Vector3::zeros()).unwrap();
        assert_relative_eq!(c.l, 0.58);
        assert_eq!(c.alpha, 0.0);
        let c = polar_coords(&Vector3::new(0.1, 0.0, -0.1), &Vector3::zeros()).unwrap();
        assert_relative_eq!(c.l, 0.1 * 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(c.alpha, std::f64::consts::FRAC_PI_4, epsilon = 1e-15);
        let hip = Vector3::new(0.3, 0.2, 0.05);
        let p = hip + Vector3::new(-0.2, 0.0, -0.55);
        let c = polar_coords(&p, &hip).unwrap();
        assert_relative_eq!(c.l, (0.04f64 + 0.3025).sqrt(), epsilon = 1e-15);
        assert_relative_eq!(c.alpha, -(0.2f64 / 0.55).atan(), epsilon = 1e-15);
        let back = hip + Vector3::new(c.l * c.alpha.sin(), 0.0, -c.l * c.alpha.cos());
        assert!((back - p).amax() < 1e-15);
        assert!(matches!(polar_coords(&hip, &hip), Err(Error::DegenerateFoot { .. })));
    }

    #[test]
    fn neighbour_case_split() {
        let (_, pre) = oracle();
        let [l1, l2, l3] = pre.distances;
        assert_eq!(select_neighbors(l1, &pre), (0, 1));
        assert_eq!(select_neighbors(l2, &pre), (0, 1));
        assert_eq!(select_neighbors(0.5 * (l2 + l3), &pre), (1, 2));
        assert_eq!(select_neighbors(l3, &pre), (1, 2));
        assert_eq!(select_neighbors(0.1, &pre), (0, 1));
        assert_eq!(select_neighbors(5.0, &pre), (1, 2));
    }

    #[test]
    fn normals_interpolate_geodesically() {
        let (_, pre) = oracle();
        let [l1, l2, _] = pre.distances;
        for j in 0..pre.facet_count() {
            let n = morph_normal(&PolarFootCoord { l: l1, alpha: 0.0 }, j, &pre);
            assert_eq!(n.x, pre.polytopes[0].normals[(j, 0)]);
            let mid = morph_normal(&PolarFootCoord { l: 0.5 * (l1 + l2), alpha: 0.0 }, j, &pre);
            let ang = 0.5 * (pre.angles[0][j] + pre.angles[1][j]);
            assert_relative_eq!(mid, Vector2::new(ang.cos(), ang.sin()), epsilon = 1e-15);
            let rotated = morph_normal(&PolarFootCoord { l: l1, alpha: 0.3 }, j, &pre);
            let expect = pre.angles[0][j] + 0.3;
            assert_relative_eq!(rotated, Vector2::new(expect.cos(), expect.sin()), epsilon = 1e-14);
            assert_relative_eq!(rotated.norm(), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn offsets_interpolate_linearly() {
        let leg = PlanarLeg::new(0.35, 0.33, Vector3::zeros(), LegDof::Sagittal, KneeDirection::Backward).unwrap();
        let base = PredefinedPolytopes::compute(&leg, &[150.0, 150.0], [0.45, 0.55, 0.65]).unwrap();
        let mut polys = base.polytopes.clone();
        for (k, d) in [(0, 80.0), (1, 160.0), (2, 300.0)] {
            polys[k].offsets.fill(d);
        }
        let pre = PredefinedPolytopes::from_polytopes(base.distances, polys).unwrap();
        let at = |l: f64| morph_offset(&PolarFootCoord { l, alpha: 0.0 }, 0, &pre);
        assert_eq!(at(0.65), 300.0);
        assert_relative_eq!(at(0.60), 230.0, epsilon = 1e-9);
        // oracle: d_a + t (d_b − d_a) with t = 0.25
        assert_relative_eq!(at(0.45 + 0.25 * 0.10), 80.0 + 0.25 * (160.0 - 80.0), epsilon = 1e-9);
        assert_relative_eq!(at(0.475), 100.0, epsilon = 1e-9);
    }

    #[test]
    fn exact_at_reference_distances() {
        let (leg, pre) = oracle();
        for k in 0..3 {
            let l = pre.distances[k];
            let morphed = morph_at(&Vector3::new(0.0, 0.0, -l), &Vector3::zeros(), &pre).unwrap();
            assert!((&morphed.normals - &pre.polytopes[k].normals).amax() < 1e-12);
            assert!((&morphed.offsets - &pre.polytopes[k].offsets).amax() < 1e-12);
            let q = leg.ik(&Vector3::new(0.0, 0.0, -l)).unwrap();
            let exact = exact_force_polytope(&q, &leg, &[150.0, 150.0]).unwrap().sorted_by_angle();
            assert_eq!(exact.facet_count(), morphed.facet_count());
        }
    }

    #[test]
    fn mismatched_facet_counts_fail() {
        let (_, pre) = oracle();
        let mut polys = pre.polytopes.clone();
        polys[2] = polys[2].permuted(&[0, 1, 2]);
        assert!(PredefinedPolytopes::from_polytopes(pre.distances, polys).is_err());
        assert!(PredefinedPolytopes::from_polytopes([0.5, 0.5, 0.6], pre.polytopes.clone()).is_err());
    }

    #[test]
    fn zero_force_jacobian_is_minus_offset_slope() {
        let (_, pre) = oracle();
        let p = Vector3::new(0.05, 0.0, -0.5);
        let jac = polytope_jacobian(&p, &Vector3::zeros(), &Vector2::zeros(), &pre).unwrap();
        let h = 1e-6;
        for c in [0, 2] {
            let mut pp = p;
            let mut pm = p;
            pp[c] += h;
            pm[c] -= h;
            let dp = morph_at(&pp, &Vector3::zeros(), &pre).unwrap().offsets;
            let dm = morph_at(&pm, &Vector3::zeros(), &pre).unwrap().offsets;
            let fd = -(dp - dm) / (2.0 * h);
            assert!((jac.wrt_foot.column(c) - fd).amax() < 1e-6);
        }
        assert!(!jac.at_kink);
        let on_kink = polytope_jacobian(&Vector3::new(0.0, 0.0, -0.55), &Vector3::zeros(), &Vector2::zeros(), &pre).unwrap();
        assert!(on_kink.at_kink);
    }

    proptest! {
        #[test]
        fn normals_are_unit(l in 0.3f64..0.8, alpha in -1.2f64..1.2) {
            let (_, pre) = oracle();
            let poly = morph_polar(&PolarFootCoord { l, alpha }, &pre);
            for r in 0..poly.facet_count() {
                prop_assert!((poly.normals.row(r).norm() - 1.0).abs() < 1e-14);
            }
        }

        #[test]
        fn rotation_equivariance(l in 0.45f64..0.65, alpha in -1.0f64..1.0) {
            let (_, pre) = oracle();
            let tilted = morph_polar(&PolarFootCoord { l, alpha }, &pre);
            let upright = morph_polar(&PolarFootCoord { l, alpha: 0.0 }, &pre);
            let rot = rotation2(alpha);
            for r in 0..tilted.facet_count() {
                let n0 = Vector2::new(upright.normals[(r, 0)], upright.normals[(r, 1)]);
                let n = Vector2::new(tilted.normals[(r, 0)], tilted.normals[(r, 1)]);
                prop_assert!((rot * n0 - n).amax() < 1e-14);
            }
            prop_assert_eq!(tilted.offsets, upright.offsets);
        }

        #[test]
        fn scaling_force_down_keeps_membership(l in 0.45f64..0.65, alpha in -0.5f64..0.5, fx in -400.0f64..400.0, fz in -900.0f64..900.0, lambda in 0.0f64..1.0) {
            let (_, pre) = oracle();
            let poly = morph_polar(&PolarFootCoord { l, alpha }, &pre);
            let f = DVector::from_vec(vec![fx, fz]);
            prop_assume!(poly.offsets.iter().all(|d| *d >= 0.0));
            if poly.contains(&f, 0.0) {
                prop_assert!(poly.contains(&(f * lambda), 1e-12));
            }
        }

        #[test]
        fn jacobian_matches_central_differences(
            l in 0.45f64..0.65, alpha in -0.6f64..0.6, y in -0.1f64..0.1,
            fx in -300.0f64..300.0, fz in -800.0f64..800.0,
        ) {
            let (_, pre) = oracle();
            prop_assume!((l - 0.55).abs() > 1e-3 && l > 0.45 + 1e-3 && l < 0.65 - 1e-3);
            let hip = Vector3::new(0.1, -0.05, 0.02);
            let p = hip + Vector3::new(l * alpha.sin(), y, -l * alpha.cos());
            let f = Vector2::new(fx, fz);
            let g = |p: &Vector3<f64>, f: &Vector2<f64>| morph_at(p, &hip, &pre).unwrap().residual(&DVector::from_vec(vec![f.x, f.y]));
            let jac = polytope_jacobian(&p, &hip, &f, &pre).unwrap();
            let h = 1e-6;
            let mut fd = DMatrix::zeros(pre.facet_count(), 5);
            for c in 0..3 {
                let mut pp = p; let mut pm = p;
                pp[c] += h; pm[c] -= h;
                fd.set_column(c, &((g(&pp, &f) - g(&pm, &f)) / (2.0 * h)));
            }
            for c in 0..2 {
                let mut fp = f; let mut fm = f;
                fp[c] += h; fm[c] -= h;
                fd.set_column(3 + c, &((g(&p, &fp) - g(&p, &fm)) / (2.0 * h)));
            }
            let mut analytic = DMatrix::zeros(pre.facet_count(), 5);
            analytic.columns_mut(0, 3).copy_from(&jac.wrt_foot);
            analytic.columns_mut(3, 2).copy_from(&jac.wrt_force);
            for (a, n) in analytic.iter().zip(fd.iter()) {
                prop_assert!((a - n).abs() / a.abs().max(1.0) < 1e-5, "{} vs {}", a, n);
            }
        }
    }
}
