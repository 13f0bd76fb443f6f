//! Optimization primitives on the orthogonal group `O(k)`: tangent
//! projection, QR retraction and Armijo backtracking.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::config::ArmijoConfig;
use crate::error::{invalid, GeomError, Result};
use crate::kernels::{ensure_finite, qf};

const ORTHO_TOL: f64 = 1e-10;
const SKEW_TOL: f64 = 1e-12;

/// A `k×k` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMatrix(DMatrix<f64>);

impl OrthogonalMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid("orthogonal matrix must be square"));
        }
        ensure_finite(&entries, "orthogonal matrix")?;
        let k = entries.nrows();
        let defect = (entries.transpose() * &entries - DMatrix::identity(k, k)).norm();
        if defect >= ORTHO_TOL {
            return Err(invalid(format!("‖OᵀO - I‖ = {defect:e}")));
        }
        Ok(Self(entries))
    }

    pub fn identity(k: usize) -> Self {
        Self(DMatrix::identity(k, k))
    }

    pub(crate) fn from_matrix_unchecked(entries: DMatrix<f64>) -> Self {
        Self(entries)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// `‖OᵀO - I‖_F`.
    pub fn orthogonality_defect(&self) -> f64 {
        let k = self.dim();
        (self.0.transpose() * &self.0 - DMatrix::identity(k, k)).norm()
    }

    /// Haar-distributed sample: QR of a standard Gaussian matrix with the
    /// positive-diagonal convention.
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        loop {
            let g = DMatrix::from_fn(k, k, |_, _| rng.sample::<f64, _>(StandardNormal));
            if let Ok(q) = qf(&g) {
                return q;
            }
        }
    }
}

/// A `k×k` skew-symmetric matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix(DMatrix<f64>);

impl SkewMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(invalid("skew matrix must be square"));
        }
        let asym = (&entries + entries.transpose()).amax();
        if asym > SKEW_TOL {
            return Err(invalid(format!("matrix is not skew (|A + Aᵀ| = {asym:e})")));
        }
        Ok(Self(entries))
    }

    /// Skew part `(W - Wᵀ)/2`.
    pub fn skew_part(w: &DMatrix<f64>) -> Self {
        Self(skew(w))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }
}

pub fn skew(w: &DMatrix<f64>) -> DMatrix<f64> {
    (w - w.transpose()) * 0.5
}

/// Projection onto the tangent space at `O`: `O·skew(OᵀV)`.
pub fn og_project(o: &OrthogonalMatrix, v: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if v.shape() != o.0.shape() {
        return Err(invalid("tangent candidate has the wrong shape"));
    }
    Ok(&o.0 * skew(&(o.0.transpose() * v)))
}

/// QR retraction `qf(O + ξ)`.
pub fn og_retract(o: &OrthogonalMatrix, xi: &DMatrix<f64>) -> Result<OrthogonalMatrix> {
    if xi.shape() != o.0.shape() {
        return Err(invalid("tangent vector has the wrong shape"));
    }
    if xi.iter().all(|v| *v == 0.0) {
        return Ok(o.clone());
    }
    qf(&(&o.0 + xi))
}

/// Outcome of one Armijo line search.
#[derive(Debug, Clone)]
pub struct ArmijoStep {
    /// Accepted step, or `0` when no step passed the test.
    pub step: f64,
    pub next: OrthogonalMatrix,
    pub next_loss: f64,
    /// Every backtrack failed; `next` is the input point.
    pub stagnated: bool,
}

/// Backtracking search along the descent direction `xi`, accepting the
/// first `α = α₀·βʲ` with `loss(R(αξ)) ≤ loss(O) - c₁·α·‖ξ‖²`.
pub fn og_armijo<F>(
    loss: F,
    o: &OrthogonalMatrix,
    xi: &DMatrix<f64>,
    cfg: &ArmijoConfig,
) -> Result<ArmijoStep>
where
    F: Fn(&OrthogonalMatrix) -> f64,
{
    let current = loss(o);
    armijo_from(&loss, o, current, xi, cfg)
}

pub(crate) fn armijo_from<F>(
    loss: &F,
    o: &OrthogonalMatrix,
    current: f64,
    xi: &DMatrix<f64>,
    cfg: &ArmijoConfig,
) -> Result<ArmijoStep>
where
    F: Fn(&OrthogonalMatrix) -> f64,
{
    if !current.is_finite() {
        return Err(invalid("loss is not finite at the current point"));
    }
    let xi_sq = xi.norm_squared();
    if xi_sq == 0.0 {
        return Ok(ArmijoStep {
            step: 0.0,
            next: o.clone(),
            next_loss: current,
            stagnated: false,
        });
    }
    let mut step = cfg.initial_step;
    for _ in 0..=cfg.max_backtracks {
        match og_retract(o, &(xi * step)) {
            Ok(candidate) => {
                let value = loss(&candidate);
                if !value.is_finite() {
                    return Err(invalid("loss is not finite at a trial point"));
                }
                if value <= current - cfg.sufficient_decrease * step * xi_sq {
                    return Ok(ArmijoStep {
                        step,
                        next: candidate,
                        next_loss: value,
                        stagnated: false,
                    });
                }
            }
            Err(GeomError::RetractionFailure(_)) => {}
            Err(e) => return Err(e),
        }
        step *= cfg.backtrack;
    }
    Ok(ArmijoStep {
        step: 0.0,
        next: o.clone(),
        next_loss: current,
        stagnated: true,
    })
}
