//! Slow, independent reference computations for checking the solvers:
//! grid search over `O(2)`, finite-difference derivatives and a grid
//! Fréchet mean on the circle. Losses here are evaluated with plain
//! `acos` of clamped inner products rather than the library's kernels.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::product_sphere::UnitRowMatrix;
use crate::sphere::SpherePoint;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    resolution: usize,
    include_reflections: bool,
}

impl GridSpec {
    pub fn new(resolution: usize, include_reflections: bool) -> Result<Self> {
        if resolution < 8 {
            return Err(invalid("grid resolution must be at least 8"));
        }
        Ok(Self {
            resolution,
            include_reflections,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn include_reflections(&self) -> bool {
        self.include_reflections
    }

    fn angle(&self, j: usize) -> f64 {
        2.0 * PI * j as f64 / self.resolution as f64
    }
}

/// Best grid element of `O(2)` for a pair of `m×2` factors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDistance {
    /// Upper bound on the orbit distance.
    pub distance: f64,
    /// Bound on `distance` minus the true infimum.
    pub error_bound: f64,
    pub angle: f64,
    pub reflection: bool,
}

fn acos_sq_loss(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let c = x.row(i).dot(&y.row(i)).clamp(-1.0, 1.0);
            let t = c.acos();
            t * t
        })
        .sum()
}

fn o2_element(angle: f64, reflection: bool) -> DMatrix<f64> {
    let (s, c) = angle.sin_cos();
    if reflection {
        DMatrix::from_row_slice(2, 2, &[c, s, s, -c])
    } else {
        DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
    }
}

/// Minimum of `sqrt(Σᵢ acos²⟨(XO)ᵢ, Yᵢ⟩)` over the grid. Each row angle is
/// 1-Lipschitz in the group angle, so the distance is `√m`-Lipschitz and
/// the nearest grid angle is at most `π/resolution` away.
pub fn o2_grid_distance(
    x: &UnitRowMatrix,
    y: &UnitRowMatrix,
    grid: GridSpec,
) -> Result<GridDistance> {
    if x.ncols() != 2 || y.ncols() != 2 {
        return Err(invalid("the O(2) grid oracle needs k = 2"));
    }
    if x.nrows() != y.nrows() {
        return Err(invalid("factors have different row counts"));
    }
    let (xm, ym) = (x.as_matrix(), y.as_matrix());
    let branches: &[bool] = if grid.include_reflections {
        &[false, true]
    } else {
        &[false]
    };
    let (loss, angle, reflection) = branches
        .iter()
        .flat_map(|&r| (0..grid.resolution).map(move |j| (j, r)))
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(j, r)| {
            let a = grid.angle(j);
            (acos_sq_loss(&(xm * o2_element(a, r)), ym), a, r)
        })
        .reduce(
            || (f64::INFINITY, 0.0, false),
            |p, q| {
                if q.0 < p.0 || (q.0 == p.0 && (q.2, q.1) < (p.2, p.1)) {
                    q
                } else {
                    p
                }
            },
        );
    Ok(GridDistance {
        distance: loss.sqrt(),
        error_bound: (x.nrows() as f64).sqrt() * PI / grid.resolution as f64,
        angle,
        reflection,
    })
}

/// Central-difference directional derivatives along a tangent basis.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    /// Central differences with step `h`.
    pub values: Vec<f64>,
    /// Richardson extrapolation from steps `h` and `h/2`.
    pub extrapolated: Vec<f64>,
    /// Largest `|values - extrapolated|`, an estimate of the truncation error.
    pub discrepancy: f64,
}

/// `(loss(R(p, +h·e)) - loss(R(p, -h·e))) / 2h` for every basis direction
/// `e`, where `R(p, v)` is a retraction (or exponential) supplied by the
/// caller.
pub fn fd_gradient<P, B, L, R>(
    loss: L,
    point: &P,
    basis: &[B],
    retract: R,
    h: f64,
) -> Result<FdGradient>
where
    L: Fn(&P) -> f64,
    R: Fn(&P, &B, f64) -> P,
{
    if !(1e-8..=1e-3).contains(&h) {
        return Err(invalid(format!(
            "finite-difference step {h} outside [1e-8, 1e-3]"
        )));
    }
    let central = |e: &B, step: f64| -> Result<f64> {
        let plus = loss(&retract(point, e, step));
        let minus = loss(&retract(point, e, -step));
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(invalid("loss is not finite near the point"));
        }
        Ok((plus - minus) / (2.0 * step))
    };
    let mut values = Vec::with_capacity(basis.len());
    let mut extrapolated = Vec::with_capacity(basis.len());
    let mut discrepancy: f64 = 0.0;
    for e in basis {
        let full = central(e, h)?;
        let half = central(e, 0.5 * h)?;
        let rich = (4.0 * half - full) / 3.0;
        discrepancy = discrepancy.max((full - rich).abs());
        values.push(full);
        extrapolated.push(rich);
    }
    Ok(FdGradient {
        values,
        extrapolated,
        discrepancy,
    })
}

/// Grid minimizer of `Σᵢ wᵢ acos²⟨pᵢ, (cos φ, sin φ)⟩` over
/// `φ = 2πj/resolution`. Ties keep the smallest angle.
pub fn exhaustive_small_frechet(
    points: &[SpherePoint],
    weights: &[f64],
    resolution: usize,
) -> Result<SpherePoint> {
    if points.is_empty() || points.len() != weights.len() {
        return Err(invalid("need matching non-empty points and weights"));
    }
    if points.iter().any(|p| p.dim() != 2) {
        return Err(invalid("points must lie on the circle"));
    }
    if resolution < 8 {
        return Err(invalid("grid resolution must be at least 8"));
    }
    let mut best = (f64::INFINITY, 0.0);
    for j in 0..resolution {
        let phi = 2.0 * PI * j as f64 / resolution as f64;
        let (s, c) = phi.sin_cos();
        let value: f64 = points
            .iter()
            .zip(weights)
            .map(|(p, w)| {
                let t = (p.coords()[0] * c + p.coords()[1] * s)
                    .clamp(-1.0, 1.0)
                    .acos();
                w * t * t
            })
            .sum();
        if value < best.0 {
            best = (value, phi);
        }
    }
    SpherePoint::normalized(DVector::from_vec(vec![best.1.cos(), best.1.sin()]))
}
