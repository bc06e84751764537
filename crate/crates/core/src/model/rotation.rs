//! ZYX Euler-angle chart for the trunk orientation.
//!
//! Orientation vectors are stored as `[roll, pitch, yaw]` and map to the
//! rotation `R = Rz(yaw) · Ry(pitch) · Rx(roll)` (base frame to world frame).

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Minimum distance of the pitch angle from ±π/2 before the chart is singular.
pub const GIMBAL_MARGIN: f64 = 1e-6;

pub fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

pub fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

pub fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn drot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn drot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn drot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// Base-to-world rotation for `[roll, pitch, yaw]`.
pub fn rotation(theta: &Vector3<f64>) -> Matrix3<f64> {
    rot_z(theta[2]) * rot_y(theta[1]) * rot_x(theta[0])
}

/// Partial derivatives `∂R/∂roll`, `∂R/∂pitch`, `∂R/∂yaw`.
pub fn rotation_derivatives(theta: &Vector3<f64>) -> [Matrix3<f64>; 3] {
    let (rx, ry, rz) = (rot_x(theta[0]), rot_y(theta[1]), rot_z(theta[2]));
    [
        rz * ry * drot_x(theta[0]),
        rz * drot_y(theta[1]) * rx,
        drot_z(theta[2]) * ry * rx,
    ]
}

/// Rate map without the singularity check; total for every input.
pub fn euler_rate_matrix(theta: &Vector3<f64>) -> Matrix3<f64> {
    let (sp, cp) = theta[1].sin_cos();
    let (sy, cy) = theta[2].sin_cos();
    // columns: world-frame axes of the roll, pitch and yaw rotations
    Matrix3::new(cy * cp, -sy, 0.0, sy * cp, cy, 0.0, -sp, 0.0, 1.0)
}

/// Returns `E(θ)` with `ω_world = E(θ) · θ̇`.
pub fn euler_rate_map(theta: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let pitch = theta[1];
    if pitch.cos().abs() <= GIMBAL_MARGIN.sin() {
        return Err(Error::GimbalLock { pitch });
    }
    Ok(euler_rate_matrix(theta))
}

/// Skew-symmetric cross-product matrix, `skew(a) b = a × b`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a[2], a[1], a[2], 0.0, -a[0], -a[1], a[0], 0.0)
}

/// Inverse of [`skew`] for (nearly) skew-symmetric matrices.
pub fn unskew(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}
