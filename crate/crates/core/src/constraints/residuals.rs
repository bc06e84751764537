//! Residuals of the per-knot, per-leg constraint blocks.
//!
//! Each function returns the quantity whose bounds are listed in its doc
//! comment. Foot positions and forces are in the world frame unless stated.

use nalgebra::{DVector, Vector2, Vector3};

use crate::error::Result;
use crate::model::rotation::rotation;
use crate::model::{LegModel, TerrainModel};
use crate::polytope::morph::{morph_polar, polar_coords, PolarFootCoord, MIN_FOOT_DISTANCE};

/// `Rᵀ(p − r) − p̄`, bounds `[−b, b]` componentwise.
pub fn kinematic_box_residual(p: &Vector3<f64>, r: &Vector3<f64>, theta: &Vector3<f64>, nominal: &Vector3<f64>) -> Vector3<f64> {
    rotation(theta).transpose() * (p - r) - nominal
}

/// `p_z − h(p_x, p_y)`, bound `= 0`.
pub fn stance_terrain_residual(p: &Vector3<f64>, terrain: &TerrainModel) -> f64 {
    p.z - terrain.height(p.x, p.y)
}

/// `p_{k+1} − p_k`, bound `= 0` between consecutive stance knots.
pub fn no_slip_residual(p: &Vector3<f64>, p_next: &Vector3<f64>) -> Vector3<f64> {
    p_next - p
}

/// `p_z − h(p_x, p_y) − h_min`, bound `≥ 0`.
pub fn swing_clearance_residual(p: &Vector3<f64>, terrain: &TerrainModel) -> f64 {
    p.z - terrain.height(p.x, p.y) - terrain.min_clearance
}

/// Rows `(−μs + t1, −μs + t2, μs + t2, μs + t1, s) · f` of the linearised cone.
/// Bounds are given by [`friction_cone_bounds`].
pub fn friction_cone_residual(f: &Vector3<f64>, p: &Vector3<f64>, terrain: &TerrainModel) -> [f64; 5] {
    let fr = terrain.frame(p.x, p.y);
    let mu = terrain.friction;
    let (fs, f1, f2) = (fr.normal.dot(f), fr.t1.dot(f), fr.t2.dot(f));
    [-mu * fs + f1, -mu * fs + f2, mu * fs + f2, mu * fs + f1, fs]
}

pub fn friction_cone_bounds(terrain: &TerrainModel) -> ([f64; 5], [f64; 5]) {
    let inf = f64::INFINITY;
    ([-inf, -inf, 0.0, 0.0, 0.0], [0.0, 0.0, inf, inf, terrain.force_cap])
}

/// Body yaw heading in the ground plane.
pub fn heading(yaw: f64) -> Vector2<f64> {
    Vector2::new(yaw.cos(), yaw.sin())
}

/// Force components in the leg's sagittal plane `(f_x', f_z)` and the lateral
/// component, with the plane rotated by the body yaw.
pub fn sagittal_force(f: &Vector3<f64>, yaw: f64) -> (Vector2<f64>, f64) {
    let (s, c) = yaw.sin_cos();
    (Vector2::new(c * f.x + s * f.y, f.z), -s * f.x + c * f.y)
}

/// Polar coordinates of the foot relative to the hip, total for every input:
/// a foot closer than the chart's minimum distance is treated as lying on the
/// downward vertical at that distance.
pub fn leg_polar(p_base: &Vector3<f64>, hip: &Vector3<f64>) -> PolarFootCoord {
    polar_coords(p_base, hip).unwrap_or(PolarFootCoord { l: MIN_FOOT_DISTANCE, alpha: 0.0 })
}

/// `A(p) f' − d(p)` of the morphed polytope, bound `≤ 0` rowwise. The foot is
/// expressed in the base frame, the force in the yaw-rotated sagittal plane.
pub fn force_polytope_residual(
    p: &Vector3<f64>,
    f: &Vector3<f64>,
    r: &Vector3<f64>,
    theta: &Vector3<f64>,
    leg: &LegModel,
) -> Result<DVector<f64>> {
    let p_base = rotation(theta).transpose() * (p - r);
    polar_coords(&p_base, &leg.hip)?;
    let poly = morph_polar(&leg_polar(&p_base, &leg.hip), &leg.polytopes);
    let (fs, _) = sagittal_force(f, theta[2]);
    Ok(poly.residual(&DVector::from_vec(vec![fs.x, fs.y])))
}

/// Lateral force component, bounds `±` the leg's lateral force limit.
pub fn lateral_force_residual(f: &Vector3<f64>, yaw: f64) -> f64 {
    sagittal_force(f, yaw).1
}

/// `h(p ± r·heading) − h(p)` for the probe ahead and behind, bound `= 0`.
pub fn foot_radius_safety(p: &Vector3<f64>, yaw: f64, terrain: &TerrainModel, radius: f64) -> [f64; 2] {
    let dir = heading(yaw) * radius;
    let h0 = terrain.height(p.x, p.y);
    [terrain.height(p.x + dir.x, p.y + dir.y) - h0, terrain.height(p.x - dir.x, p.y - dir.y) - h0]
}

/// Fractions along foot→knee at which the shin is probed: `k/(n+1)` for
/// `k = 1..=n`, then the knee itself.
pub fn shin_probe_fractions(n_probe: usize) -> Vec<f64> {
    (1..=n_probe).map(|k| k as f64 / (n_probe + 1) as f64).chain(std::iter::once(1.0)).collect()
}

/// Straight-shin knee point `p + s (cos β cos ψ, cos β sin ψ, sin β)`.
pub fn knee_point(p: &Vector3<f64>, yaw: f64, shin_length: f64, shin_angle: f64) -> Vector3<f64> {
    let (sb, cb) = shin_angle.sin_cos();
    p + shin_length * Vector3::new(cb * yaw.cos(), cb * yaw.sin(), sb)
}

/// Clearance `z − h(x, y)` of the shin probes and the knee, bound `≥ 0`.
pub fn shin_clearance_residual(
    p: &Vector3<f64>,
    yaw: f64,
    terrain: &TerrainModel,
    shin_length: f64,
    shin_angle: f64,
    n_probe: usize,
) -> Vec<f64> {
    let knee = knee_point(p, yaw, shin_length, shin_angle);
    shin_probe_fractions(n_probe)
        .into_iter()
        .map(|t| {
            let q = p + t * (knee - p);
            q.z - terrain.height(q.x, q.y)
        })
        .collect()
}
