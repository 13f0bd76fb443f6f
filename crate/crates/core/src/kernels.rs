//! Dense linear-algebra primitives: symmetric eigendecomposition, the
//! Q factor of a QR decomposition, orthogonal Procrustes, the SPD Sylvester
//! solve and numerical rank.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GeomError, Result};
use crate::orthogonal::OrthogonalMatrix;
use crate::product_sphere::UnitRowMatrix;

/// Threshold used to decide which singular (or eigen) values count as zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankTolerance {
    pub absolute_floor: f64,
    pub relative_factor: f64,
}

impl Default for RankTolerance {
    fn default() -> Self {
        Self {
            absolute_floor: 1e-12,
            relative_factor: 1e-8,
        }
    }
}

impl RankTolerance {
    pub fn new(absolute_floor: f64, relative_factor: f64) -> Result<Self> {
        if !(absolute_floor >= 0.0 && relative_factor >= 0.0) {
            return Err(invalid("rank tolerances must be non-negative"));
        }
        Ok(Self {
            absolute_floor,
            relative_factor,
        })
    }

    /// Effective cut-off given the largest singular value.
    pub fn threshold(&self, largest: f64) -> f64 {
        self.absolute_floor.max(self.relative_factor * largest)
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl SymEig {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let q = &self.eigenvectors;
        q * DMatrix::from_diagonal(&self.eigenvalues) * q.transpose()
    }
}

pub(crate) fn ensure_finite(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(invalid(format!("{what} has non-finite entries")))
    }
}

pub(crate) fn ensure_square(a: &DMatrix<f64>, what: &str) -> Result<()> {
    if a.is_square() {
        Ok(())
    } else {
        Err(invalid(format!(
            "{what} must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )))
    }
}

/// Symmetric eigendecomposition. The input is symmetrized as `(E + Eᵀ)/2`
/// first, so rounding-level asymmetry from upstream projections is accepted.
pub fn sym_eig(e: &DMatrix<f64>) -> Result<SymEig> {
    ensure_square(e, "eigen input")?;
    ensure_finite(e, "eigen input")?;
    let sym = (e + e.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();

    let n = e.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig {
        eigenvalues,
        eigenvectors,
    })
}

/// Orthogonal factor of the QR decomposition, with `R` normalized to a
/// positive diagonal so the result is a deterministic function of `A`.
pub fn qf(a: &DMatrix<f64>) -> Result<OrthogonalMatrix> {
    ensure_square(a, "qf input")?;
    ensure_finite(a, "qf input")?;
    let qr = a.clone().qr();
    let r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = RankTolerance::default().threshold(diag_max);
    if let Some(pos) = r.diagonal().iter().position(|v| v.abs() <= cutoff) {
        return Err(GeomError::RetractionFailure(format!(
            "matrix is numerically singular (R[{pos},{pos}] = {:e})",
            r[(pos, pos)]
        )));
    }
    let mut q = qr.q();
    for (j, d) in r.diagonal().iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthogonalMatrix::from_matrix_unchecked(q))
}

/// Solves `argmin_O ‖XO - Y‖_F` over the orthogonal group using the thin SVD
/// of the `k×k` cross product `XᵀY = UΣVᵀ`; the minimizer is `UVᵀ`.
pub fn procrustes(x: &UnitRowMatrix, y: &UnitRowMatrix) -> Result<OrthogonalMatrix> {
    if x.shape() != y.shape() {
        return Err(invalid(format!(
            "procrustes shape mismatch: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    procrustes_raw(x.as_matrix(), y.as_matrix())
}

pub(crate) fn procrustes_raw(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<OrthogonalMatrix> {
    ensure_finite(x, "procrustes input")?;
    ensure_finite(y, "procrustes input")?;
    let cross = x.transpose() * y;
    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(invalid("SVD did not return singular vectors")),
    };
    Ok(OrthogonalMatrix::from_matrix_unchecked(u * v_t))
}

/// Best Procrustes rotation in the other connected component of `O(k)`:
/// `UDVᵀ` where `D` flips the sign paired with the smallest singular value.
pub fn procrustes_reflected(x: &UnitRowMatrix, y: &UnitRowMatrix) -> Result<OrthogonalMatrix> {
    if x.shape() != y.shape() {
        return Err(invalid(format!(
            "procrustes shape mismatch: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    ensure_finite(x.as_matrix(), "procrustes input")?;
    ensure_finite(y.as_matrix(), "procrustes input")?;
    let svd = (x.as_matrix().transpose() * y.as_matrix()).svd(true, true);
    let (mut u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(invalid("SVD did not return singular vectors")),
    };
    let smallest = svd.singular_values.imin();
    u.column_mut(smallest).neg_mut();
    Ok(OrthogonalMatrix::from_matrix_unchecked(u * v_t))
}

/// Solves `EA + AE = W` for symmetric positive-definite `E` in the
/// eigenbasis of `E`, where the operator is diagonal with entries `λᵢ + λⱼ`.
pub fn sylvester_spd(e: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    ensure_square(e, "Sylvester operator")?;
    if w.shape() != e.shape() {
        return Err(invalid("Sylvester right-hand side has the wrong shape"));
    }
    ensure_finite(w, "Sylvester right-hand side")?;
    let eig = sym_eig(e)?;
    let largest = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let smallest = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let cutoff = RankTolerance::default().threshold(largest);
    if e.nrows() > 0 && smallest <= cutoff {
        return Err(GeomError::SingularSylvester(format!(
            "smallest eigenvalue {smallest:e} is not above {cutoff:e}"
        )));
    }
    let q = &eig.eigenvectors;
    let lambda = &eig.eigenvalues;
    let mut rotated = q.transpose() * w * q;
    for j in 0..rotated.ncols() {
        for i in 0..rotated.nrows() {
            rotated[(i, j)] /= lambda[i] + lambda[j];
        }
    }
    Ok(q * rotated * q.transpose())
}

/// Count of singular values above the effective threshold of `tol`.
pub fn numerical_rank(a: &DMatrix<f64>, tol: RankTolerance) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.singular_values();
    let largest = sv.iter().fold(0.0f64, |acc, v| acc.max(*v));
    let cutoff = tol.threshold(largest);
    sv.iter().filter(|s| **s > cutoff).count()
}

/// Smallest and largest singular values.
pub(crate) fn singular_extremes(a: &DMatrix<f64>) -> (f64, f64) {
    let sv = a.singular_values();
    let lo = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sv.iter().copied().fold(0.0, f64::max);
    (lo, hi)
}
