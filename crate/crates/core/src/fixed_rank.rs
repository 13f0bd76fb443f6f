//! Riemannian structure of the full-rank stratum: vertical and horizontal
//! projections, the quotient metric on horizontal lifts, and lifting of
//! ambient gradients.
//!
//! At a full-rank `X` the vertical space is `{XΩ : Ω skew}` (the tangent
//! space of the orbit) and the horizontal space is its complement
//! `{V : VᵀX = XᵀV, diag(VXᵀ) = 0}`. The vertical projection is
//! `P^v(W) = X·A` where `A` solves the Sylvester equation
//! `(XᵀX)A + A(XᵀX) = XᵀW - WᵀX`; `A` is skew whenever the right-hand
//! side is.

use nalgebra::DMatrix;

use crate::error::{invalid, GeomError, Result};
use crate::kernels::{numerical_rank, sylvester_spd, RankTolerance};
use crate::product_sphere::{
    ps_metric, ps_project, row_normal_components, ProductTangent, UnitRowMatrix,
};

const TANGENT_TOL: f64 = 1e-10;
/// Relative bound on `‖VᵀX - XᵀV‖_F / ‖V‖_F`.
pub const HORIZONTAL_TOL: f64 = 1e-8;

/// A horizontal tangent vector at a full-rank base point.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizontalTangent {
    base: UnitRowMatrix,
    vec: DMatrix<f64>,
}

impl HorizontalTangent {
    pub fn new(base: UnitRowMatrix, vec: DMatrix<f64>) -> Result<Self> {
        if vec.shape() != base.shape() {
            return Err(invalid("horizontal vector shape does not match its base"));
        }
        let normal = row_normal_components(&base, &vec);
        let norm = vec.norm();
        if normal > TANGENT_TOL * norm.max(1.0) {
            return Err(invalid(format!(
                "not tangent: max |diag(VXᵀ)| = {normal:e}"
            )));
        }
        let asym = symmetry_defect(&base, &vec);
        if asym > HORIZONTAL_TOL * norm {
            return Err(invalid(format!(
                "not horizontal: ‖VᵀX - XᵀV‖ = {asym:e} for ‖V‖ = {norm:e}"
            )));
        }
        Ok(Self { base, vec })
    }

    pub fn base(&self) -> &UnitRowMatrix {
        &self.base
    }

    pub fn vec(&self) -> &DMatrix<f64> {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn to_product_tangent(&self) -> ProductTangent {
        ProductTangent::new_unchecked(self.base.clone(), self.vec.clone())
    }
}

/// `‖VᵀX - XᵀV‖_F`.
pub fn symmetry_defect(x: &UnitRowMatrix, v: &DMatrix<f64>) -> f64 {
    let vtx = v.transpose() * x.as_matrix();
    (&vtx - vtx.transpose()).norm()
}

fn require_full_rank(x: &UnitRowMatrix) -> Result<()> {
    let rank = numerical_rank(x.as_matrix(), RankTolerance::default());
    if rank < x.ncols() {
        return Err(GeomError::SingularSylvester(format!(
            "base point has rank {rank} < k = {}",
            x.ncols()
        )));
    }
    Ok(())
}

fn require_base(x: &UnitRowMatrix, w: &ProductTangent) -> Result<()> {
    if w.base() != x {
        return Err(invalid("tangent vector is based at a different point"));
    }
    Ok(())
}

/// The skew coefficient `A` of the vertical component `X·A` of `w`.
pub fn vertical_coefficient(x: &UnitRowMatrix, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if w.shape() != x.shape() {
        return Err(invalid("shape mismatch in vertical projection"));
    }
    require_full_rank(x)?;
    let xm = x.as_matrix();
    let gram = xm.transpose() * xm;
    let xtw = xm.transpose() * w;
    let rhs = &xtw - xtw.transpose();
    sylvester_spd(&gram, &rhs)
}

pub fn vertical_project(x: &UnitRowMatrix, w: &ProductTangent) -> Result<ProductTangent> {
    require_base(x, w)?;
    let a = vertical_coefficient(x, w.vec())?;
    Ok(ProductTangent::new_unchecked(x.clone(), x.as_matrix() * a))
}

pub fn horizontal_project(x: &UnitRowMatrix, w: &ProductTangent) -> Result<HorizontalTangent> {
    require_base(x, w)?;
    let a = vertical_coefficient(x, w.vec())?;
    let vec = w.vec() - x.as_matrix() * a;
    Ok(HorizontalTangent {
        base: x.clone(),
        vec,
    })
}

/// Norm of the vertical component of a raw tangent matrix.
pub(crate) fn vertical_norm(x: &UnitRowMatrix, v: &DMatrix<f64>) -> Result<f64> {
    let a = vertical_coefficient(x, v)?;
    Ok((x.as_matrix() * a).norm())
}

/// Quotient metric of two tangent vectors at `[X]`, evaluated on their
/// horizontal lifts at `X`.
pub fn quotient_metric(
    x: &UnitRowMatrix,
    u: &HorizontalTangent,
    v: &HorizontalTangent,
) -> Result<f64> {
    if u.base() != x || v.base() != x {
        return Err(invalid("horizontal lifts must be based at X"));
    }
    require_full_rank(x)?;
    for h in [u, v] {
        let asym = symmetry_defect(x, h.vec());
        if asym > HORIZONTAL_TOL * h.norm() {
            return Err(invalid(format!("lift is not horizontal (defect {asym:e})")));
        }
    }
    ps_metric(&u.to_product_tangent(), &v.to_product_tangent())
}

/// Horizontal representative of the quotient gradient, from the flat
/// gradient of an `O(k)`-invariant function at `X`.
pub fn lift_gradient(
    x: &UnitRowMatrix,
    euclidean_grad: &DMatrix<f64>,
) -> Result<HorizontalTangent> {
    let tangent = ps_project(x, euclidean_grad)?;
    horizontal_project(x, &tangent)
}
