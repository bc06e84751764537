//! Residual elements binding the constraint functions to local variable vectors.
//!
//! Every element documents its local layout; the transcription supplies the
//! matching global indices.

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};

use crate::constraints::block::{central_difference_cols, ConstraintFn};
use crate::constraints::residuals::{knee_point, leg_polar, sagittal_force, shin_probe_fractions};
use crate::model::rotation::{rotation, rotation_derivatives, skew};
use crate::model::{LegModel, TerrainModel, GRAVITY};
use crate::polytope::morph::{morph_polar, polar_coords, polytope_jacobian, KINK_BAND};

fn v3(v: &[f64], at: usize) -> Vector3<f64> {
    Vector3::new(v[at], v[at + 1], v[at + 2])
}

fn put(jac: &mut DMatrix<f64>, row: usize, col: usize, m: &Matrix3<f64>) {
    jac.view_mut((row, col), (3, 3)).copy_from(m);
}

/// Derivative of the rate map `E(θ)` with respect to pitch and yaw.
fn rate_map_derivatives(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (sp, cp) = theta[1].sin_cos();
    let (sy, cy) = theta[2].sin_cos();
    [
        Matrix3::zeros(),
        Matrix3::new(-cy * sp, 0.0, 0.0, -sy * sp, 0.0, 0.0, -cp, 0.0, 0.0),
        Matrix3::new(-sy * cp, -cy, 0.0, cy * cp, -sy, 0.0, 0.0, 0.0, 0.0),
    ]
}

/// Pins the 12 base variables `[r, ṙ, θ, ω]` to a target.
pub struct Boundary {
    pub target: [f64; 12],
}

impl ConstraintFn for Boundary {
    fn dim(&self) -> usize {
        12
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..12 {
            out[i] = v[i] - self.target[i];
        }
    }
    fn jacobian(&self, _v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill_with_identity();
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// `r_{k+1} − r_k − dt ṙ_k`; local `[r_k, ṙ_k, r_{k+1}]`.
pub struct PositionDefect {
    pub dt: f64,
}

impl ConstraintFn for PositionDefect {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..3 {
            out[i] = v[6 + i] - v[i] - self.dt * v[3 + i];
        }
    }
    fn jacobian(&self, _v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for i in 0..3 {
            jac[(i, i)] = -1.0;
            jac[(i, 3 + i)] = -self.dt;
            jac[(i, 6 + i)] = 1.0;
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Linear SRBD residual with `r̈ = (ṙ_{k+1} − ṙ_k)/dt`; local `[ṙ_k, ṙ_{k+1}, f_1, …]`.
pub struct LinearDynamics {
    pub mass: f64,
    pub dt: f64,
    pub forces: usize,
}

impl ConstraintFn for LinearDynamics {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..3 {
            let total: f64 = (0..self.forces).map(|j| v[6 + 3 * j + i]).sum();
            out[i] = self.mass * (v[3 + i] - v[i]) / self.dt - total;
        }
        out[2] += self.mass * GRAVITY;
    }
    fn jacobian(&self, _v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for i in 0..3 {
            jac[(i, i)] = -self.mass / self.dt;
            jac[(i, 3 + i)] = self.mass / self.dt;
            for j in 0..self.forces {
                jac[(i, 6 + 3 * j + i)] = -1.0;
            }
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// `E(θ_k)(θ_{k+1} − θ_k)/dt − ω_k`; local `[θ_k, θ_{k+1}, ω_k]`.
pub struct EulerDefect {
    pub dt: f64,
}

impl ConstraintFn for EulerDefect {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let (t0, t1, w) = (v3(v, 0), v3(v, 3), v3(v, 6));
        let res = crate::model::rotation::euler_rate_matrix(&t0) * (t1 - t0) / self.dt - w;
        out.copy_from_slice(res.as_slice());
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        let (t0, t1) = (v3(v, 0), v3(v, 3));
        let e = crate::model::rotation::euler_rate_matrix(&t0);
        let de = rate_map_derivatives(&t0);
        let rate = (t1 - t0) / self.dt;
        let mut d0 = -e / self.dt;
        for c in 0..3 {
            d0.set_column(c, &(d0.column(c) + de[c] * rate));
        }
        put(jac, 0, 0, &d0);
        put(jac, 0, 3, &(e / self.dt));
        put(jac, 0, 6, &(-Matrix3::identity()));
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// Angular SRBD residual with `ω̇ = (ω_{k+1} − ω_k)/dt`;
/// local `[r, θ, ω_k, ω_{k+1}, (p_1, f_1), …]`.
pub struct AngularDynamics {
    pub inertia: Matrix3<f64>,
    pub dt: f64,
    pub contacts: usize,
}

impl ConstraintFn for AngularDynamics {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let (r, th, w0, w1) = (v3(v, 0), v3(v, 3), v3(v, 6), v3(v, 9));
        let rot = rotation(&th);
        let iw = rot * self.inertia * rot.transpose();
        let mut res = iw * (w1 - w0) / self.dt + w0.cross(&(iw * w0));
        for j in 0..self.contacts {
            let (p, f) = (v3(v, 12 + 6 * j), v3(v, 15 + 6 * j));
            res -= f.cross(&(r - p));
        }
        out.copy_from_slice(res.as_slice());
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        let (r, th, w0, w1) = (v3(v, 0), v3(v, 3), v3(v, 6), v3(v, 9));
        let rot = rotation(&th);
        let iw = rot * self.inertia * rot.transpose();
        let wdot = (w1 - w0) / self.dt;
        let drot = rotation_derivatives(&th);
        let mut dth = Matrix3::zeros();
        for c in 0..3 {
            let di = drot[c] * self.inertia * rot.transpose() + rot * self.inertia * drot[c].transpose();
            dth.set_column(c, &(di * wdot + w0.cross(&(di * w0))));
        }
        let mut dr = Matrix3::zeros();
        for j in 0..self.contacts {
            let (p, f) = (v3(v, 12 + 6 * j), v3(v, 15 + 6 * j));
            dr -= skew(&f);
            put(jac, 0, 12 + 6 * j, &skew(&f));
            put(jac, 0, 15 + 6 * j, &skew(&(r - p)));
        }
        put(jac, 0, 0, &dr);
        put(jac, 0, 3, &dth);
        put(jac, 0, 6, &(-iw / self.dt + skew(&w0) * iw - skew(&(iw * w0))));
        put(jac, 0, 9, &(iw / self.dt));
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// `∂/∂r`, `∂/∂θ`, `∂/∂p` of `Rᵀ(p − r)`.
fn base_frame_jacobian(r: &Vector3<f64>, th: &Vector3<f64>, p: &Vector3<f64>) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
    let rt = rotation(th).transpose();
    let drot = rotation_derivatives(th);
    let d = p - r;
    let dth = Matrix3::from_columns(&[drot[0].transpose() * d, drot[1].transpose() * d, drot[2].transpose() * d]);
    (-rt, dth, rt)
}

/// Kinematic box; local `[r, θ, p]`.
pub struct KinematicBox {
    pub nominal: Vector3<f64>,
}

impl ConstraintFn for KinematicBox {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let res = crate::constraints::kinematic_box_residual(&v3(v, 6), &v3(v, 0), &v3(v, 3), &self.nominal);
        out.copy_from_slice(res.as_slice());
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        let (dr, dth, dp) = base_frame_jacobian(&v3(v, 0), &v3(v, 3), &v3(v, 6));
        put(jac, 0, 0, &dr);
        put(jac, 0, 3, &dth);
        put(jac, 0, 6, &dp);
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// Stance contact `p_z − h` or swing clearance `p_z − h − h_min`; local `[p]`.
pub struct TerrainGap {
    pub terrain: Arc<TerrainModel>,
    pub offset: f64,
}

impl ConstraintFn for TerrainGap {
    fn dim(&self) -> usize {
        1
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        out[0] = v[2] - self.terrain.height(v[0], v[1]) - self.offset;
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        let (_, hx, hy) = self.terrain.height_and_gradient(v[0], v[1]);
        jac[(0, 0)] = -hx;
        jac[(0, 1)] = -hy;
        jac[(0, 2)] = 1.0;
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// Horizontal no-slip between consecutive stance knots; local `[x_k, y_k, x_{k+1}, y_{k+1}]`.
/// The vertical component follows from the stance terrain rows at both knots.
pub struct NoSlip;

impl ConstraintFn for NoSlip {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        out[0] = v[2] - v[0];
        out[1] = v[3] - v[1];
    }
    fn jacobian(&self, _v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        jac[(0, 0)] = -1.0;
        jac[(0, 2)] = 1.0;
        jac[(1, 1)] = -1.0;
        jac[(1, 3)] = 1.0;
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Linearised friction cone; local `[p, f]`.
pub struct FrictionCone {
    pub terrain: Arc<TerrainModel>,
}

impl ConstraintFn for FrictionCone {
    fn dim(&self) -> usize {
        5
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&crate::constraints::friction_cone_residual(&v3(v, 3), &v3(v, 0), &self.terrain));
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        let fr = self.terrain.frame(v[0], v[1]);
        let mu = self.terrain.friction;
        let rows = [-mu * fr.normal + fr.t1, -mu * fr.normal + fr.t2, mu * fr.normal + fr.t2, mu * fr.normal + fr.t1, fr.normal];
        for (i, row) in rows.iter().enumerate() {
            for c in 0..3 {
                jac[(i, 3 + c)] = row[c];
            }
        }
        if matches!(self.terrain.field, crate::model::HeightField::Flat { .. }) {
            jac.view_mut((0, 0), (5, 3)).fill(0.0);
        } else {
            central_difference_cols(|x, o| self.eval(x, o), v, 5, 0..3, jac);
        }
    }
}

/// Morphed force polytope rows followed by the lateral force row;
/// local `[r, θ, p, f]`.
pub struct ForcePolytope {
    pub leg: LegModel,
}

impl ForcePolytope {
    fn facets(&self) -> usize {
        self.leg.polytopes.facet_count()
    }
}

impl ConstraintFn for ForcePolytope {
    fn dim(&self) -> usize {
        self.facets() + 1
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let (r, th, p, f) = (v3(v, 0), v3(v, 3), v3(v, 6), v3(v, 9));
        let pb = rotation(&th).transpose() * (p - r);
        let poly = morph_polar(&leg_polar(&pb, &self.leg.hip), &self.leg.polytopes);
        let (fs, lat) = sagittal_force(&f, th[2]);
        let n = self.facets();
        for j in 0..n {
            out[j] = poly.normals[(j, 0)] * fs.x + poly.normals[(j, 1)] * fs.y - poly.offsets[j];
        }
        out[n] = lat;
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        let (r, th, p, f) = (v3(v, 0), v3(v, 3), v3(v, 6), v3(v, 9));
        let pb = rotation(&th).transpose() * (p - r);
        let (fs, lat) = sagittal_force(&f, th[2]);
        let Ok(pj) = polytope_jacobian(&pb, &self.leg.hip, &fs, &self.leg.polytopes) else {
            return crate::constraints::central_difference(|x, o| self.eval(x, o), v, self.dim(), jac);
        };
        let (dr, dth, dp) = base_frame_jacobian(&r, &th, &p);
        let (sy, cy) = th[2].sin_cos();
        let n = self.facets();
        jac.fill(0.0);
        for j in 0..n {
            let g = Vector3::new(pj.wrt_foot[(j, 0)], pj.wrt_foot[(j, 1)], pj.wrt_foot[(j, 2)]).transpose();
            let (a0, a1) = (pj.wrt_force[(j, 0)], pj.wrt_force[(j, 1)]);
            jac.view_mut((j, 0), (1, 3)).copy_from(&(g * dr));
            let mut gth = g * dth;
            gth[2] += a0 * lat;
            jac.view_mut((j, 3), (1, 3)).copy_from(&gth);
            jac.view_mut((j, 6), (1, 3)).copy_from(&(g * dp));
            jac[(j, 9)] = a0 * cy;
            jac[(j, 10)] = a0 * sy;
            jac[(j, 11)] = a1;
        }
        jac[(n, 5)] = -fs.x;
        jac[(n, 9)] = -sy;
        jac[(n, 10)] = cy;
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
    fn at_kink(&self, v: &[f64]) -> bool {
        let pb = rotation(&v3(v, 3)).transpose() * (v3(v, 6) - v3(v, 0));
        polar_coords(&pb, &self.leg.hip).map(|c| (c.l - self.leg.polytopes.distances[1]).abs() < KINK_BAND).unwrap_or(false)
    }
}

/// Foot-radius probes ahead and behind along the heading; local `[θ, p]`.
pub struct FootRadius {
    pub terrain: Arc<TerrainModel>,
    pub radius: f64,
}

impl ConstraintFn for FootRadius {
    fn dim(&self) -> usize {
        2
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&crate::constraints::foot_radius_safety(&v3(v, 3), v[2], &self.terrain, self.radius));
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        let (sy, cy) = v[2].sin_cos();
        let d = Vector2::new(cy, sy) * self.radius;
        let (_, hx0, hy0) = self.terrain.height_and_gradient(v[3], v[4]);
        for (row, sign) in [(0, 1.0), (1, -1.0)] {
            let (_, hx, hy) = self.terrain.height_and_gradient(v[3] + sign * d.x, v[4] + sign * d.y);
            jac[(row, 3)] = hx - hx0;
            jac[(row, 4)] = hy - hy0;
            jac[(row, 2)] = sign * self.radius * (-hx * sy + hy * cy);
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// Shin probes and knee clearance; local `[θ, p]`.
pub struct ShinClearance {
    pub terrain: Arc<TerrainModel>,
    pub shin_length: f64,
    pub shin_angle: f64,
    pub n_probe: usize,
}

impl ConstraintFn for ShinClearance {
    fn dim(&self) -> usize {
        self.n_probe + 1
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let rows = crate::constraints::shin_clearance_residual(&v3(v, 3), v[2], &self.terrain, self.shin_length, self.shin_angle, self.n_probe);
        out.copy_from_slice(&rows);
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        let p = v3(v, 3);
        let yaw = v[2];
        let knee = knee_point(&p, yaw, self.shin_length, self.shin_angle);
        let reach = self.shin_length * self.shin_angle.cos();
        for (row, t) in shin_probe_fractions(self.n_probe).into_iter().enumerate() {
            let q = p + t * (knee - p);
            let (_, hx, hy) = self.terrain.height_and_gradient(q.x, q.y);
            jac[(row, 3)] = -hx;
            jac[(row, 4)] = -hy;
            jac[(row, 5)] = 1.0;
            jac[(row, 2)] = -t * reach * (-hx * yaw.sin() + hy * yaw.cos());
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// Terrain clearance of the foot, and optionally the shin probes, at interior
/// points of the straight segment between two knots; local
/// `[ψ_k, p_k, ψ_{k+1}, p_{k+1}]`.
pub struct SegmentClearance {
    pub terrain: Arc<TerrainModel>,
    /// Interpolation parameters in `(0, 1)`.
    pub fractions: Vec<f64>,
    /// `(shin length, shin angle, n_probe)` when the shin is checked too.
    pub shin: Option<(f64, f64, usize)>,
}

impl SegmentClearance {
    /// Fractions along foot→knee checked at every interpolation point.
    fn along(&self) -> Vec<f64> {
        let mut t = vec![0.0];
        if let Some((_, _, n)) = self.shin {
            t.extend(shin_probe_fractions(n));
        }
        t
    }

    fn reach(&self) -> Vector3<f64> {
        self.shin.map_or(Vector3::zeros(), |(len, angle, _)| len * Vector3::new(angle.cos(), angle.cos(), angle.sin()))
    }
}

impl ConstraintFn for SegmentClearance {
    fn dim(&self) -> usize {
        self.fractions.len() * self.along().len()
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let along = self.along();
        let reach = self.reach();
        for (a, &s) in self.fractions.iter().enumerate() {
            let p = v3(v, 1) * (1.0 - s) + v3(v, 5) * s;
            let yaw = v[0] * (1.0 - s) + v[4] * s;
            let dir = Vector3::new(reach.x * yaw.cos(), reach.y * yaw.sin(), reach.z);
            for (b, &t) in along.iter().enumerate() {
                let q = p + t * dir;
                out[a * along.len() + b] = q.z - self.terrain.height(q.x, q.y);
            }
        }
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        let along = self.along();
        let reach = self.reach();
        for (a, &s) in self.fractions.iter().enumerate() {
            let p = v3(v, 1) * (1.0 - s) + v3(v, 5) * s;
            let yaw = v[0] * (1.0 - s) + v[4] * s;
            let dir = Vector3::new(reach.x * yaw.cos(), reach.y * yaw.sin(), reach.z);
            for (b, &t) in along.iter().enumerate() {
                let q = p + t * dir;
                let (_, hx, hy) = self.terrain.height_and_gradient(q.x, q.y);
                let row = a * along.len() + b;
                let d_yaw = -t * (-hx * reach.x * yaw.sin() + hy * reach.y * yaw.cos());
                for (col, w) in [(0, 1.0 - s), (4, s)] {
                    jac[(row, col)] = w * d_yaw;
                    jac[(row, col + 1)] = -w * hx;
                    jac[(row, col + 2)] = -w * hy;
                    jac[(row, col + 3)] = w;
                }
            }
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

/// Force regulariser `(f − W/n ẑ)/W`; local `[f]`.
pub struct ForceDeviation {
    pub target: f64,
    pub scale: f64,
}

impl ConstraintFn for ForceDeviation {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        out[0] = v[0] / self.scale;
        out[1] = v[1] / self.scale;
        out[2] = (v[2] - self.target) / self.scale;
    }
    fn jacobian(&self, _v: &[f64], jac: &mut DMatrix<f64>) {
        jac.fill(0.0);
        for i in 0..3 {
            jac[(i, i)] = 1.0 / self.scale;
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
    fn is_linear(&self) -> bool {
        true
    }
}

/// Base-frame foot velocity between knots; local `[r_k, θ_k, p_k, r_{k+1}, θ_{k+1}, p_{k+1}]`.
pub struct FootVelocity {
    pub dt: f64,
}

impl ConstraintFn for FootVelocity {
    fn dim(&self) -> usize {
        3
    }
    fn eval(&self, v: &[f64], out: &mut [f64]) {
        let b = |o: usize| rotation(&v3(v, o + 3)).transpose() * (v3(v, o + 6) - v3(v, o));
        out.copy_from_slice(((b(9) - b(0)) / self.dt).as_slice());
    }
    fn jacobian(&self, v: &[f64], jac: &mut DMatrix<f64>) {
        for (o, sign) in [(0, -1.0), (9, 1.0)] {
            let (dr, dth, dp) = base_frame_jacobian(&v3(v, o), &v3(v, o + 3), &v3(v, o + 6));
            let s = sign / self.dt;
            put(jac, 0, o, &(dr * s));
            put(jac, 0, o + 3, &(dth * s));
            put(jac, 0, o + 6, &(dp * s));
        }
    }
    fn analytic_jacobian(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::block::central_difference;
    use crate::model::RobotModel;
    use proptest::prelude::*;

    fn check(e: &dyn ConstraintFn, v: &[f64], tol: f64) -> Result<(), TestCaseError> {
        let mut a = DMatrix::zeros(e.dim(), v.len());
        let mut fd = DMatrix::zeros(e.dim(), v.len());
        e.jacobian(v, &mut a);
        central_difference(|x, o| e.eval(x, o), v, e.dim(), &mut fd);
        for (x, y) in a.iter().zip(fd.iter()) {
            prop_assert!((x - y).abs() <= tol * y.abs().max(1.0), "analytic {} vs fd {}\n{}\n{}", x, y, a, fd);
        }
        Ok(())
    }

    fn pallet() -> Arc<TerrainModel> {
        Arc::new(TerrainModel::pallet(0.1, 0.5, 0.5, 0.03, 1700.0, 0.05).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn analytic_jacobians_match(seed in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let robot = RobotModel::hyq_like();
            let small = |i: usize| seed[i] * 0.3;
            let r = [small(0), small(1), 0.55 + 0.1 * seed[2]];
            let th = [small(3), small(4), seed[5]];
            let leg = &robot.legs[2];
            let rot = rotation(&Vector3::from(th));
            let pb = leg.nominal_foot + Vector3::new(0.1 * seed[6], 0.1 * seed[7], 0.1 * seed[8]);
            let p = Vector3::from(r) + rot * pb;
            let f = [100.0 * seed[9], 100.0 * seed[10], 300.0 + 100.0 * seed[11]];
            let mut v: Vec<f64> = [r, th].concat();
            v.extend(p.iter());
            v.extend(f);
            let l = (pb - leg.hip).xz().norm();
            if (l - leg.polytopes.distances[1]).abs() > 1e-3 {
                check(&ForcePolytope { leg: leg.clone() }, &v, 1e-5)?;
            }
            check(&KinematicBox { nominal: leg.nominal_foot }, &v[..9], 1e-6)?;

            let mut w: Vec<f64> = [r, th].concat();
            w.extend((0..6).map(|i| seed[12 + i]));
            w.extend(p.iter());
            w.extend(f);
            w.extend([0.2, -0.1, 0.0]);
            w.extend([10.0 * seed[18], 5.0, 200.0]);
            check(&AngularDynamics { inertia: robot.inertia, dt: 0.1, contacts: 2 }, &w, 1e-6)?;

            let e: Vec<f64> = (0..9).map(|i| seed[20 + i] * 0.5).collect();
            check(&EulerDefect { dt: 0.1 }, &e, 1e-6)?;

            let fv: Vec<f64> = (0..18).map(|i| seed[i] * 0.4).collect();
            check(&FootVelocity { dt: 0.1 }, &fv, 1e-6)?;

            let tp = [th[0], th[1], th[2], 0.45 + 0.1 * seed[30], 0.1 * seed[31], 0.05];
            check(&FootRadius { terrain: pallet(), radius: 0.02 }, &tp, 1e-5)?;
            check(&ShinClearance { terrain: pallet(), shin_length: 0.3, shin_angle: 0.65, n_probe: 2 }, &tp, 1e-5)?;
            check(&TerrainGap { terrain: pallet(), offset: 0.03 }, &tp[3..], 1e-5)?;
            let pf = [tp[3], tp[4], tp[5], f[0], f[1], f[2]];
            check(&FrictionCone { terrain: pallet() }, &pf, 1e-5)?;
        }
    }

    #[test]
    fn linear_elements() {
        let e = LinearDynamics { mass: 10.0, dt: 0.1, forces: 1 };
        let v = [0.0, 0.0, 0.0, 0.0, 0.0, 0.219, 0.0, 0.0, 120.0];
        let mut out = [0.0; 3];
        e.eval(&v, &mut out);
        assert!(out.iter().all(|x| x.abs() < 1e-12), "{out:?}");
        let mut jac = DMatrix::zeros(3, 9);
        e.jacobian(&v, &mut jac);
        assert_eq!(jac[(2, 8)], -1.0);
    }
}
