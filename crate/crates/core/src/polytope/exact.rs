use nalgebra::DVector;

use super::halfspace::{hull_halfspaces, HalfspacePolytope};
use crate::error::{Error, Result};
use crate::validate::leg::PlanarLeg;

/// Minimum `|det J|` accepted by [`exact_force_polytope`].
pub const SINGULAR_DET: f64 = 1e-8;

/// Every `±τ^lim` sign pattern mapped through `f = J(q)^{-T} τ`.
pub fn force_polytope_vertices(q: &DVector<f64>, leg: &PlanarLeg, torque_limits: &[f64]) -> Result<Vec<DVector<f64>>> {
    let j = leg.jacobian(q);
    let n = j.ncols();
    if torque_limits.len() != n || torque_limits.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidModel("torque limits must be positive, one per joint".into()));
    }
    let det = j.determinant();
    if det.abs() <= SINGULAR_DET {
        return Err(Error::SingularConfiguration { det });
    }
    let jt_lu = j.transpose().lu();
    Ok((0..1usize << n)
        .map(|signs| {
            let tau = DVector::from_fn(n, |k, _| if signs >> k & 1 == 1 { torque_limits[k] } else { -torque_limits[k] });
            jt_lu.solve(&tau).expect("nonsingular Jacobian checked above")
        })
        .collect())
}

/// Ground-truth force polytope at joint configuration `q`: the convex hull of
/// the enumerated vertices, in halfspace form with unit normals.
pub fn exact_force_polytope(q: &DVector<f64>, leg: &PlanarLeg, torque_limits: &[f64]) -> Result<HalfspacePolytope> {
    let vertices = force_polytope_vertices(q, leg, torque_limits)?;
    hull_halfspaces(&vertices)
}
