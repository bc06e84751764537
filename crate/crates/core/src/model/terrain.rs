//! Terrain height fields and the contact frame derived from them.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Height-field primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeightField {
    Flat {
        #[serde(default)]
        height: f64,
    },
    /// Axis-aligned step: ground at 0 for `x < edge_x`, `height` beyond.
    Pallet { height: f64, edge_x: f64 },
    /// Regular grid of samples, bilinear in between, clamped at the border.
    Samples {
        x0: f64,
        y0: f64,
        spacing: f64,
        nx: usize,
        ny: usize,
        /// Row-major, `heights[iy * nx + ix]`.
        heights: Vec<f64>,
    },
}

/// Terrain model: height field plus contact parameters.
///
/// `smoothing` is the width of the C1 ramp that replaces sharp step edges in
/// the planner's view of the terrain. The ramp lies entirely on the low side
/// of the edge so the smoothed field is never below the sharp one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerrainModel {
    pub field: HeightField,
    pub friction: f64,
    pub min_clearance: f64,
    pub force_cap: f64,
    pub smoothing: f64,
}

/// Orthonormal contact frame `(t1, t2, s)` with `s = t1 × t2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFrame {
    pub normal: Vector3<f64>,
    pub t1: Vector3<f64>,
    pub t2: Vector3<f64>,
}

/// C1 smoothstep on `[0, 1]`.
fn smoothstep(t: f64) -> (f64, f64) {
    if t <= 0.0 {
        (0.0, 0.0)
    } else if t >= 1.0 {
        (1.0, 0.0)
    } else {
        (t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t))
    }
}

impl HeightField {
    fn validate(&self) -> Result<()> {
        match self {
            HeightField::Flat { height } if !height.is_finite() => {
                Err(Error::Config("flat terrain height must be finite".into()))
            }
            HeightField::Pallet { height, edge_x } => {
                if !(height.is_finite() && *height >= 0.0 && edge_x.is_finite()) {
                    Err(Error::Config("pallet height must be ≥ 0 and finite".into()))
                } else {
                    Ok(())
                }
            }
            HeightField::Samples { spacing, nx, ny, heights, .. } => {
                if *spacing <= 0.0 || *nx < 2 || *ny < 2 || heights.len() != nx * ny {
                    Err(Error::Config("sample grid needs spacing > 0, nx, ny ≥ 2 and nx·ny heights".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Height and gradient `(h, ∂h/∂x, ∂h/∂y)`; `smoothing = 0` gives the sharp field.
    pub fn eval(&self, x: f64, y: f64, smoothing: f64) -> (f64, f64, f64) {
        match self {
            HeightField::Flat { height } => (*height, 0.0, 0.0),
            HeightField::Pallet { height, edge_x } => {
                if smoothing <= 0.0 {
                    (if x >= *edge_x { *height } else { 0.0 }, 0.0, 0.0)
                } else {
                    let (s, ds) = smoothstep((x - (edge_x - smoothing)) / smoothing);
                    (height * s, height * ds / smoothing, 0.0)
                }
            }
            HeightField::Samples { x0, y0, spacing, nx, ny, heights } => {
                let gx = ((x - x0) / spacing).clamp(0.0, (*nx - 1) as f64);
                let gy = ((y - y0) / spacing).clamp(0.0, (*ny - 1) as f64);
                let ix = (gx.floor() as usize).min(nx - 2);
                let iy = (gy.floor() as usize).min(ny - 2);
                let (u, v) = (gx - ix as f64, gy - iy as f64);
                let h = |i: usize, j: usize| heights[j * nx + i];
                let (h00, h10, h01, h11) = (h(ix, iy), h(ix + 1, iy), h(ix, iy + 1), h(ix + 1, iy + 1));
                let val = h00 * (1.0 - u) * (1.0 - v) + h10 * u * (1.0 - v) + h01 * (1.0 - u) * v + h11 * u * v;
                let inside_x = (x - x0) / spacing > 0.0 && (x - x0) / spacing < (*nx - 1) as f64;
                let inside_y = (y - y0) / spacing > 0.0 && (y - y0) / spacing < (*ny - 1) as f64;
                let dx = if inside_x { ((h10 - h00) * (1.0 - v) + (h11 - h01) * v) / spacing } else { 0.0 };
                let dy = if inside_y { ((h01 - h00) * (1.0 - u) + (h11 - h10) * u) / spacing } else { 0.0 };
                (val, dx, dy)
            }
        }
    }
}

impl TerrainModel {
    pub fn new(field: HeightField, friction: f64, min_clearance: f64, force_cap: f64, smoothing: f64) -> Result<Self> {
        let t = TerrainModel { field, friction, min_clearance, force_cap, smoothing };
        t.validate()?;
        Ok(t)
    }

    pub fn flat(friction: f64, min_clearance: f64, force_cap: f64) -> Result<Self> {
        Self::new(HeightField::Flat { height: 0.0 }, friction, min_clearance, force_cap, 0.0)
    }

    pub fn pallet(height: f64, edge_x: f64, friction: f64, min_clearance: f64, force_cap: f64, smoothing: f64) -> Result<Self> {
        Self::new(HeightField::Pallet { height, edge_x }, friction, min_clearance, force_cap, smoothing)
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        if !(self.friction > 0.0) {
            return Err(Error::Config("friction coefficient must be > 0".into()));
        }
        if !(self.min_clearance >= 0.0) {
            return Err(Error::Config("min clearance must be ≥ 0".into()));
        }
        if !(self.force_cap > 0.0) {
            return Err(Error::Config("force cap must be > 0".into()));
        }
        if !(self.smoothing >= 0.0) {
            return Err(Error::Config("edge smoothing must be ≥ 0".into()));
        }
        Ok(())
    }

    /// Copy of this terrain with sharp edges (used by post-hoc validators).
    pub fn sharp(&self) -> TerrainModel {
        TerrainModel { smoothing: 0.0, ..self.clone() }
    }

    pub fn height(&self, x: f64, y: f64) -> f64 {
        self.field.eval(x, y, self.smoothing).0
    }

    pub fn height_and_gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        self.field.eval(x, y, self.smoothing)
    }

    /// Unit normal and tangents at `(x, y)`; `t1` lies in the x–z plane.
    pub fn frame(&self, x: f64, y: f64) -> SurfaceFrame {
        let (_, hx, hy) = self.height_and_gradient(x, y);
        let normal = Vector3::new(-hx, -hy, 1.0).normalize();
        let t1 = Vector3::new(1.0, 0.0, hx).normalize();
        let t2 = normal.cross(&t1);
        SurfaceFrame { normal, t1, t2 }
    }

    pub fn normal(&self, x: f64, y: f64) -> Vector3<f64> {
        self.frame(x, y).normal
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pallet_heights() {
        let t = TerrainModel::pallet(0.1, 0.5, 0.5, 0.03, 1000.0, 0.02).unwrap();
        assert_eq!(t.height(0.0, 0.0), 0.0);
        assert_eq!(t.height(0.5, 0.3), 0.1);
        assert_eq!(t.height(0.48, 0.0), 0.0);
        assert!((t.height(0.49, 0.0) - 0.05).abs() < 1e-12);
        let sharp = t.sharp();
        assert_eq!(sharp.height(0.4999, 0.0), 0.0);
        assert_eq!(sharp.height(0.5, 0.0), 0.1);
    }

    #[test]
    fn smoothed_never_below_sharp() {
        let t = TerrainModel::pallet(0.15, 0.3, 0.5, 0.03, 1000.0, 0.05).unwrap();
        for i in 0..=400 {
            let x = -0.2 + i as f64 * 0.002;
            assert!(t.height(x, 0.0) >= t.sharp().height(x, 0.0));
        }
    }

    #[test]
    fn samples_bilinear() {
        let field = HeightField::Samples { x0: 0.0, y0: 0.0, spacing: 1.0, nx: 2, ny: 2, heights: vec![0.0, 1.0, 0.0, 1.0] };
        let t = TerrainModel::new(field, 0.5, 0.0, 1.0, 0.0).unwrap();
        assert!((t.height(0.25, 0.5) - 0.25).abs() < 1e-15);
        assert!((t.height_and_gradient(0.25, 0.5).1 - 1.0).abs() < 1e-15);
        assert_eq!(t.height(5.0, 5.0), 1.0);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(TerrainModel::flat(0.0, 0.03, 100.0).is_err());
        assert!(TerrainModel::flat(0.5, -0.1, 100.0).is_err());
        assert!(TerrainModel::flat(0.5, 0.03, 0.0).is_err());
        assert!(TerrainModel::pallet(-0.1, 0.0, 0.5, 0.03, 100.0, 0.01).is_err());
    }

    proptest! {
        #[test]
        fn frame_is_right_handed_orthonormal(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let t = TerrainModel::pallet(0.1, 0.0, 0.5, 0.03, 1000.0, 0.2).unwrap();
            let f = t.frame(x, y);
            prop_assert!((f.normal.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.t1.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.t2.norm() - 1.0).abs() < 1e-12);
            prop_assert!((f.t1.cross(&f.t2) - f.normal).amax() < 1e-12);
        }

        #[test]
        fn pallet_gradient_matches_finite_difference(x in -0.5f64..0.5) {
            let t = TerrainModel::pallet(0.1, 0.0, 0.5, 0.03, 1000.0, 0.05).unwrap();
            let h = 1e-7;
            let fd = (t.height(x + h, 0.0) - t.height(x - h, 0.0)) / (2.0 * h);
            prop_assert!((t.height_and_gradient(x, 0.0).1 - fd).abs() < 1e-5);
        }
    }
}
