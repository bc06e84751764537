//! Single-rigid-body dynamics residuals.

use nalgebra::{Matrix3, Vector3};

use super::robot::GRAVITY;
use super::rotation::rotation;

/// Quantities the residuals need at one knot. Accelerations come from the
/// transcription's finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSample<'a> {
    pub r: Vector3<f64>,
    pub rdd: Vector3<f64>,
    pub theta: Vector3<f64>,
    pub omega: Vector3<f64>,
    pub omega_dot: Vector3<f64>,
    pub feet: &'a [Vector3<f64>],
    pub forces: &'a [Vector3<f64>],
}

/// `m r̈ − Σ f_i + m g ẑ`; zero when the linear dynamics hold.
pub fn srbd_linear_residual(s: &DynamicsSample, mass: f64) -> Vector3<f64> {
    let total: Vector3<f64> = s.forces.iter().sum();
    mass * s.rdd - total + Vector3::new(0.0, 0.0, mass * GRAVITY)
}

/// World-frame inertia `R I_b Rᵀ`.
pub fn world_inertia(theta: &Vector3<f64>, inertia_body: &Matrix3<f64>) -> Matrix3<f64> {
    let r = rotation(theta);
    r * inertia_body * r.transpose()
}

/// `I ω̇ + ω × (I ω) − Σ f_i × (r − p_i)` with `I` the world-frame inertia.
pub fn srbd_angular_residual(s: &DynamicsSample, inertia_body: &Matrix3<f64>) -> Vector3<f64> {
    let iw = world_inertia(&s.theta, inertia_body);
    let moment: Vector3<f64> = s.feet.iter().zip(s.forces).map(|(p, f)| f.cross(&(s.r - p))).sum();
    iw * s.omega_dot + s.omega.cross(&(iw * s.omega)) - moment
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample<'a>(feet: &'a [Vector3<f64>], forces: &'a [Vector3<f64>]) -> DynamicsSample<'a> {
        DynamicsSample {
            r: Vector3::new(0.1, -0.2, 0.55),
            rdd: Vector3::zeros(),
            theta: Vector3::zeros(),
            omega: Vector3::zeros(),
            omega_dot: Vector3::zeros(),
            feet,
            forces,
        }
    }

    fn inertia() -> Matrix3<f64> {
        Matrix3::from_diagonal(&Vector3::new(4.26, 8.97, 9.88))
    }

    #[test]
    fn static_equilibrium() {
        let m = 85.0;
        let f = vec![Vector3::new(0.0, 0.0, m * GRAVITY / 4.0); 4];
        let p = vec![Vector3::zeros(); 4];
        assert_relative_eq!(srbd_linear_residual(&sample(&p, &f), m), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn free_fall() {
        let f = vec![Vector3::zeros(); 4];
        let mut s = sample(&f, &f);
        s.rdd = Vector3::new(0.0, 0.0, -GRAVITY);
        assert_relative_eq!(srbd_linear_residual(&s, 30.0), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn single_contact_linear_residual() {
        let f = [Vector3::new(0.0, 0.0, 120.0)];
        let p = [Vector3::zeros()];
        let mut s = sample(&p, &f);
        s.rdd = Vector3::new(0.0, 0.0, 2.19);
        // 10 · 2.19 − 120 + 10 · 9.81 = 21.9 − 120 + 98.1
        let expected = Vector3::new(0.0, 0.0, 21.9 - 120.0 + 98.1);
        assert_relative_eq!(srbd_linear_residual(&s, 10.0), expected, epsilon = 1e-12);
        assert!(srbd_linear_residual(&s, 10.0).norm() < 1e-12);
    }

    #[test]
    fn forces_through_com_produce_no_moment() {
        let s0 = sample(&[], &[]);
        let feet = vec![s0.r; 3];
        let forces = vec![Vector3::new(10.0, -3.0, 200.0), Vector3::new(0.0, 5.0, 100.0), Vector3::new(1.0, 1.0, 1.0)];
        assert_relative_eq!(srbd_angular_residual(&sample(&feet, &forces), &inertia()), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn symmetric_feet_cancel() {
        let r = sample(&[], &[]).r;
        let feet = [r + Vector3::new(0.5, 0.0, -0.5), r + Vector3::new(-0.5, 0.0, -0.5)];
        let forces = [Vector3::new(0.0, 0.0, 300.0); 2];
        assert_relative_eq!(srbd_angular_residual(&sample(&feet, &forces), &inertia()), Vector3::zeros(), epsilon = 1e-12);
    }

    #[test]
    fn single_foot_moment() {
        let r = sample(&[], &[]).r;
        let feet = [r + Vector3::new(0.3, 0.0, -0.5)];
        let forces = [Vector3::new(0.0, 0.0, 100.0)];
        // (p − r) × f = (0.3, 0, −0.5) × (0, 0, 100) = (0, −30, 0); the residual removes it
        let d = feet[0] - r;
        let cross = Vector3::new(d.y * 100.0 - d.z * 0.0, d.z * 0.0 - d.x * 100.0, 0.0);
        let res = srbd_angular_residual(&sample(&feet, &forces), &inertia());
        assert_relative_eq!(res, -cross, epsilon = 1e-12);
        assert_relative_eq!(res, Vector3::new(0.0, 30.0, 0.0), epsilon = 1e-12);
    }

    fn arb_vec(scale: f64) -> impl Strategy<Value = Vector3<f64>> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(a, b, c)| Vector3::new(a, b, c))
    }

    proptest! {
        #[test]
        fn moment_invariant_along_com_line(
            r in arb_vec(1.0), p in arb_vec(1.0), f in arb_vec(300.0), lambda in -500.0f64..500.0,
            theta in arb_vec(0.5), omega in arb_vec(2.0), omega_dot in arb_vec(5.0),
        ) {
            let feet = [p];
            let base = [f];
            let shifted = [f + lambda * (r - p)];
            let s = |forces| DynamicsSample { r, rdd: Vector3::zeros(), theta, omega, omega_dot, feet: &feet, forces };
            let a = srbd_angular_residual(&s(&base), &inertia());
            let b = srbd_angular_residual(&s(&shifted), &inertia());
            prop_assert!((a - b).amax() < 1e-9 * (1.0 + a.amax()));
        }

        #[test]
        fn linear_residual_is_linear(f1 in arb_vec(300.0), f2 in arb_vec(300.0), a in arb_vec(5.0), b in arb_vec(5.0), k in -3.0f64..3.0) {
            let feet = [Vector3::zeros()];
            let g = |f: Vector3<f64>, acc: Vector3<f64>| {
                let forces = [f];
                let mut s = sample(&feet, &forces);
                s.rdd = acc;
                srbd_linear_residual(&s, 20.0) - srbd_linear_residual(&sample(&feet, &[Vector3::zeros()]), 20.0)
            };
            let lhs = g(f1 + k * f2, a + k * b);
            let rhs = g(f1, a) + k * g(f2, b);
            prop_assert!((lhs - rhs).amax() < 1e-9);
        }
    }
}
