//! Conversion between correlation matrices `Z = XXᵀ` and unit-row factors
//! `X`, plus validation of candidate correlation matrices.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{invalid, GeomError, Result};
use crate::kernels::{numerical_rank, sym_eig, RankTolerance};
use crate::product_sphere::UnitRowMatrix;

/// A failed correlation-matrix check with its magnitude.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NotSquare {
        rows: usize,
        cols: usize,
    },
    NonFinite,
    /// Largest `|Zᵢⱼ - Zⱼᵢ|`.
    Asymmetry(f64),
    /// Largest `|Zᵢᵢ - 1|`.
    UnitDiagonalViolation(f64),
    /// Magnitude of the most negative eigenvalue.
    PSDViolation(f64),
    /// Largest amount by which `|Zᵢⱼ|` exceeds 1.
    EntryRange(f64),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotSquare { rows, cols } => write!(f, "matrix is {rows}x{cols}, not square"),
            Violation::NonFinite => write!(f, "matrix has non-finite entries"),
            Violation::Asymmetry(v) => write!(f, "asymmetry {v:e}"),
            Violation::UnitDiagonalViolation(v) => write!(f, "diagonal deviates from 1 by {v:e}"),
            Violation::PSDViolation(v) => write!(f, "negative eigenvalue of magnitude {v:e}"),
            Violation::EntryRange(v) => write!(f, "entry exceeds [-1, 1] by {v:e}"),
        }
    }
}

/// Acceptance thresholds used by [`validate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValidationTolerances {
    pub symmetry: f64,
    pub diagonal: f64,
    /// Eigenvalues down to `-psd` are accepted.
    pub psd: f64,
    pub entry: f64,
}

impl Default for ValidationTolerances {
    fn default() -> Self {
        Self {
            symmetry: 1e-10,
            diagonal: 1e-10,
            psd: 1e-8,
            entry: 1e-10,
        }
    }
}

/// A validated correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
    detected_rank: usize,
}

impl CorrelationMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        validate(&entries, &ValidationTolerances::default()).map_err(GeomError::InvalidCorrelation)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Numerical rank under the default tolerance.
    pub fn detected_rank(&self) -> usize {
        self.detected_rank
    }

    pub fn rank(&self, tol: RankTolerance) -> usize {
        numerical_rank(&self.entries, tol)
    }
}

/// Checks symmetry, unit diagonal, positive semidefiniteness and the entry
/// range, returning every violation found.
pub fn validate(
    z: &DMatrix<f64>,
    tol: &ValidationTolerances,
) -> std::result::Result<CorrelationMatrix, Vec<Violation>> {
    if !z.is_square() {
        return Err(vec![Violation::NotSquare {
            rows: z.nrows(),
            cols: z.ncols(),
        }]);
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(vec![Violation::NonFinite]);
    }
    let mut found = Vec::new();
    let asym = (z - z.transpose()).amax();
    if asym > tol.symmetry {
        found.push(Violation::Asymmetry(asym));
    }
    let diag = z
        .diagonal()
        .iter()
        .map(|d| (d - 1.0).abs())
        .fold(0.0, f64::max);
    if diag > tol.diagonal {
        found.push(Violation::UnitDiagonalViolation(diag));
    }
    if z.nrows() > 0 {
        let eig = sym_eig(z).map_err(|_| vec![Violation::NonFinite])?;
        let min = eig.eigenvalues.min();
        if min < -tol.psd {
            found.push(Violation::PSDViolation(-min));
        }
    }
    let over = z.iter().map(|v| v.abs() - 1.0).fold(0.0, f64::max);
    if over > tol.entry {
        found.push(Violation::EntryRange(over));
    }
    if !found.is_empty() {
        return Err(found);
    }
    Ok(CorrelationMatrix {
        detected_rank: numerical_rank(z, RankTolerance::default()),
        entries: z.clone(),
    })
}

/// A unit-row factor `X` with `XXᵀ ≈ Z` and `k` columns, built from the top
/// eigenpairs of `Z`. Each eigenvector is signed so that its largest entry
/// in magnitude is positive; repeated eigenvalues may yield any basis of
/// their eigenspace.
pub fn factorize(z: &CorrelationMatrix, k: usize, tol: RankTolerance) -> Result<UnitRowMatrix> {
    let m = z.dim();
    if k < 1 {
        return Err(invalid("k must be at least 1"));
    }
    let eig = sym_eig(z.entries())?;
    let largest = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let threshold = tol.threshold(largest);
    let rank = eig.eigenvalues.iter().filter(|l| **l > threshold).count();
    if rank > k {
        return Err(GeomError::RankExceedsK { rank, k });
    }
    let mut x = DMatrix::zeros(m, k);
    for j in 0..rank {
        let mut u = eig.eigenvectors.column(j).into_owned();
        let pivot = u.iamax();
        if u[pivot] < 0.0 {
            u.neg_mut();
        }
        x.set_column(j, &(u * eig.eigenvalues[j].sqrt()));
    }
    for i in 0..m {
        let n = x.row(i).norm();
        if n < 1e-8 {
            return Err(invalid(format!("row {i} of the factor vanished")));
        }
        x.row_mut(i).unscale_mut(n);
    }
    Ok(UnitRowMatrix::from_matrix_unchecked(x))
}

/// `XXᵀ`, which depends only on the orbit `[X]`.
pub fn gram(x: &UnitRowMatrix) -> CorrelationMatrix {
    let xm = x.as_matrix();
    let g = xm * xm.transpose();
    let mut entries = (&g + g.transpose()) * 0.5;
    entries.fill_diagonal(1.0);
    CorrelationMatrix {
        detected_rank: numerical_rank(&entries, RankTolerance::default()),
        entries,
    }
}
