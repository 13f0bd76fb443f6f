//! The product manifold `Π^m S^{k-1}` of `m×k` matrices with unit rows,
//! carrying the spherical product metric `⟨V, W⟩ = tr(VᵀW)`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::config::{SolverConfig, SolverReport};
use crate::error::{invalid, GeomError, Result};
use crate::orthogonal::OrthogonalMatrix;
use crate::sphere::{self, unit_angle};

const UNIT_ROW_TOL: f64 = 1e-10;
const TANGENT_TOL: f64 = 1e-10;

/// An `m×k` matrix whose rows have unit Euclidean norm, `k ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitRowMatrix(DMatrix<f64>);

impl UnitRowMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&entries)?;
        for (i, row) in entries.row_iter().enumerate() {
            let n = row.norm();
            if (n - 1.0).abs() > UNIT_ROW_TOL {
                return Err(invalid(format!("row {i} has norm {n}, expected 1")));
            }
        }
        Ok(Self(entries))
    }

    /// Scales every row to unit norm; zero rows are rejected.
    pub fn normalized(mut entries: DMatrix<f64>) -> Result<Self> {
        check_shape(&entries)?;
        for i in 0..entries.nrows() {
            let n = entries.row(i).norm();
            if !(n > 0.0) {
                return Err(invalid(format!("row {i} is zero and cannot be normalized")));
            }
            entries.row_mut(i).unscale_mut(n);
        }
        Ok(Self(entries))
    }

    pub fn from_row_slice(m: usize, k: usize, data: &[f64]) -> Result<Self> {
        if data.len() != m * k {
            return Err(invalid("data length does not match the shape"));
        }
        Self::new(DMatrix::from_row_slice(m, k, data))
    }

    /// Wraps a matrix whose rows are unit by construction (e.g. `XO`).
    pub(crate) fn from_matrix_unchecked(entries: DMatrix<f64>) -> Self {
        Self(entries)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        self.0.row(i).transpose()
    }

    /// Right action `X ↦ XO`.
    pub fn act(&self, o: &OrthogonalMatrix) -> Self {
        Self(&self.0 * o.as_matrix())
    }
}

fn check_shape(entries: &DMatrix<f64>) -> Result<()> {
    if entries.nrows() == 0 {
        return Err(invalid("matrix has no rows"));
    }
    if entries.ncols() < 2 {
        return Err(invalid(format!(
            "need at least 2 columns, got {}",
            entries.ncols()
        )));
    }
    if !entries.iter().all(|v| v.is_finite()) {
        return Err(invalid("matrix has non-finite entries"));
    }
    Ok(())
}

/// A tangent vector to `Π^m S^{k-1}`: every row of `vec` is orthogonal to
/// the matching row of `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductTangent {
    base: UnitRowMatrix,
    vec: DMatrix<f64>,
}

impl ProductTangent {
    pub fn new(base: UnitRowMatrix, vec: DMatrix<f64>) -> Result<Self> {
        if vec.shape() != base.shape() {
            return Err(invalid("tangent shape does not match its base"));
        }
        let worst = row_normal_components(&base, &vec);
        if worst > TANGENT_TOL * vec.norm().max(1.0) {
            return Err(invalid(format!(
                "matrix is not tangent: max |diag(V Xᵀ)| = {worst:e}"
            )));
        }
        Ok(Self { base, vec })
    }

    pub(crate) fn new_unchecked(base: UnitRowMatrix, vec: DMatrix<f64>) -> Self {
        Self { base, vec }
    }

    pub fn zero(base: UnitRowMatrix) -> Self {
        let (m, k) = base.shape();
        Self {
            base,
            vec: DMatrix::zeros(m, k),
        }
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

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            base: self.base.clone(),
            vec: &self.vec * c,
        }
    }

    pub fn into_parts(self) -> (UnitRowMatrix, DMatrix<f64>) {
        (self.base, self.vec)
    }
}

/// `max_i |⟨Vᵢ, Xᵢ⟩|`.
pub(crate) fn row_normal_components(base: &UnitRowMatrix, vec: &DMatrix<f64>) -> f64 {
    base.as_matrix()
        .row_iter()
        .zip(vec.row_iter())
        .map(|(x, v)| x.dot(&v).abs())
        .fold(0.0, f64::max)
}

/// Squared product distance between two matrices with unit rows.
pub(crate) fn dist_sq_raw(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (0..a.nrows())
        .map(|i| {
            let t = unit_angle(a.row(i).iter(), b.row(i).iter());
            t * t
        })
        .sum()
}

/// `d(X, Y) = sqrt(Σᵢ θ²(Xᵢ, Yᵢ))`.
pub fn ps_dist(x: &UnitRowMatrix, y: &UnitRowMatrix) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(dist_sq_raw(x.as_matrix(), y.as_matrix()).sqrt())
}

pub fn ps_metric(v: &ProductTangent, w: &ProductTangent) -> Result<f64> {
    if v.base != w.base {
        return Err(invalid("tangent vectors live at different base points"));
    }
    Ok(v.vec.dot(&w.vec))
}

/// Row-wise sphere exponential of `t·V`.
pub fn ps_exp(v: &ProductTangent, t: f64) -> UnitRowMatrix {
    let x = v.base.as_matrix();
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let row = sphere::exp_vec(&x.row(i).transpose(), &(v.vec.row(i).transpose() * t));
        out.set_row(i, &row.transpose());
    }
    UnitRowMatrix(out)
}

/// Row-wise sphere logarithm; fails on the first row whose pair is within
/// `guard` of antipodal.
pub fn ps_log(x: &UnitRowMatrix, y: &UnitRowMatrix, guard: f64) -> Result<ProductTangent> {
    if x.shape() != y.shape() {
        return Err(invalid("shape mismatch in logarithm"));
    }
    let mut vec = DMatrix::zeros(x.nrows(), x.ncols());
    for i in 0..x.nrows() {
        let row = sphere::log_vec(&x.row_vector(i), &y.row_vector(i), guard)
            .ok_or(GeomError::AntipodalLogarithm { row: Some(i) })?;
        vec.set_row(i, &row.transpose());
    }
    Ok(ProductTangent {
        base: x.clone(),
        vec,
    })
}

/// Removes from each row of `W` its component along the matching row of `X`.
pub fn ps_project(x: &UnitRowMatrix, w: &DMatrix<f64>) -> Result<ProductTangent> {
    if w.shape() != x.shape() {
        return Err(invalid("shape mismatch in projection"));
    }
    let mut vec = w.clone();
    for i in 0..x.nrows() {
        let xi = x.0.row(i);
        let c = xi.dot(&w.row(i));
        let update = w.row(i) - xi * c;
        vec.set_row(i, &update);
    }
    Ok(ProductTangent {
        base: x.clone(),
        vec,
    })
}

/// Product-sphere Fréchet mean together with per-row diagnostics.
#[derive(Debug, Clone)]
pub struct ProductMean {
    pub mean: UnitRowMatrix,
    pub row_reports: Vec<SolverReport>,
    /// Rows where some input was nearly antipodal to the iterate.
    pub clamped_rows: Vec<usize>,
}

impl ProductMean {
    pub fn converged(&self) -> bool {
        self.row_reports.iter().all(|r| r.converged)
    }

    pub fn max_iterations(&self) -> usize {
        self.row_reports
            .iter()
            .map(|r| r.iterations)
            .max()
            .unwrap_or(0)
    }
}

/// Weighted Fréchet mean of fixed representatives in `Π^m S^{k-1}`; the
/// problem separates into one sphere mean per row.
pub fn ps_frechet_fixed(
    points: &[UnitRowMatrix],
    weights: &[f64],
    cfg: &SolverConfig,
) -> Result<ProductMean> {
    ps_frechet_fixed_from(points, weights, cfg, None)
}

/// As [`ps_frechet_fixed`], additionally considering `warm` as a starting
/// point: each row starts from whichever of the warm row and the normalized
/// Euclidean mean has the lower loss, so the result never scores worse than
/// `warm`.
pub fn ps_frechet_fixed_from(
    points: &[UnitRowMatrix],
    weights: &[f64],
    cfg: &SolverConfig,
    warm: Option<&UnitRowMatrix>,
) -> Result<ProductMean> {
    if points.is_empty() {
        return Err(invalid("Fréchet mean of an empty set"));
    }
    if points.len() != weights.len() {
        return Err(invalid("points and weights differ in length"));
    }
    let shape = points[0].shape();
    if points.iter().any(|p| p.shape() != shape) {
        return Err(invalid("points have different shapes"));
    }
    if let Some(w) = warm {
        if w.shape() != shape {
            return Err(invalid("warm start has the wrong shape"));
        }
    }
    let weights = sphere::normalized_weights(weights)?;
    let (m, k) = shape;

    let rows: Vec<(DVector<f64>, SolverReport, bool)> = (0..m)
        .into_par_iter()
        .map(|j| {
            let cloud: Vec<DVector<f64>> = points.iter().map(|p| p.row_vector(j)).collect();
            let mut start = sphere::euclidean_start(&cloud, &weights);
            if let Some(w) = warm {
                let w_row = w.row_vector(j);
                if sphere::frechet_loss(&w_row, &cloud, &weights)
                    <= sphere::frechet_loss(&start, &cloud, &weights)
                {
                    start = w_row;
                }
            }
            sphere::descend_mean(&cloud, &weights, start, cfg)
        })
        .collect();

    let mut mean = DMatrix::zeros(m, k);
    let mut row_reports = Vec::with_capacity(m);
    let mut clamped_rows = Vec::new();
    for (j, (row, report, clamped)) in rows.into_iter().enumerate() {
        mean.set_row(j, &row.transpose());
        row_reports.push(report);
        if clamped {
            clamped_rows.push(j);
        }
    }
    Ok(ProductMean {
        mean: UnitRowMatrix(mean),
        row_reports,
        clamped_rows,
    })
}
