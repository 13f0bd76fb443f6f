//! The unit sphere `S^{k-1}`: geodesic distance, exponential and logarithm,
//! tangent projection, normalization retraction, and the weighted Fréchet
//! mean of a point cloud by Riemannian gradient descent.

use nalgebra::DVector;

use crate::config::{bb_step, noise_floor, SolverConfig, SolverReport};
use crate::error::{invalid, GeomError, Result};

const UNIT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-10;
const SERIES_SWITCH: f64 = 1e-12;
/// `θ/sin θ` is replaced by its limit below this angle (equivalent to
/// `1 - cos θ < 1e-12`).
const RATIO_SWITCH: f64 = 1.414_213_562_373_095e-6;
/// Cap on `θ/sin θ` near antipodal configurations.
pub(crate) const RATIO_CAP: f64 = 1e8;

/// A point of `S^{k-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint(DVector<f64>);

impl SpherePoint {
    pub fn new(coords: DVector<f64>) -> Result<Self> {
        if !coords.iter().all(|v| v.is_finite()) {
            return Err(invalid("sphere point has non-finite coordinates"));
        }
        let norm = coords.norm();
        if (norm - 1.0).abs() > UNIT_TOL {
            return Err(invalid(format!("sphere point has norm {norm}, expected 1")));
        }
        Ok(Self(coords))
    }

    pub fn normalized(coords: DVector<f64>) -> Result<Self> {
        let norm = coords.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self(coords / norm))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coords))
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// A tangent vector at `base`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereTangent {
    base: SpherePoint,
    vec: DVector<f64>,
}

impl SphereTangent {
    pub fn new(base: SpherePoint, vec: DVector<f64>) -> Result<Self> {
        if vec.len() != base.dim() {
            return Err(invalid("tangent vector dimension mismatch"));
        }
        let inner = base.coords().dot(&vec);
        if inner.abs() > TANGENT_TOL * vec.norm().max(1.0) {
            return Err(invalid(format!(
                "vector is not tangent (inner product with base {inner:e})"
            )));
        }
        Ok(Self { base, vec })
    }

    pub fn zero(base: SpherePoint) -> Self {
        let vec = DVector::zeros(base.dim());
        Self { base, vec }
    }

    pub fn base(&self) -> &SpherePoint {
        &self.base
    }

    pub fn vec(&self) -> &DVector<f64> {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }
}

/// Angle between two unit vectors, `2·atan2(‖x - y‖, ‖x + y‖)`. Equal to
/// `arccos⟨x, y⟩` on the sphere but accurate near `0` and `π`.
pub(crate) fn unit_angle<'a, I>(x: I, y: I) -> f64
where
    I: IntoIterator<Item = &'a f64>,
{
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in x.into_iter().zip(y) {
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// `θ / sin θ`, clamped at [`RATIO_CAP`]; the flag reports the clamp.
pub(crate) fn angle_ratio(theta: f64) -> (f64, bool) {
    if theta < RATIO_SWITCH {
        return (1.0 + theta * theta / 6.0, false);
    }
    let s = theta.sin();
    if s <= theta / RATIO_CAP {
        (RATIO_CAP, true)
    } else {
        (theta / s, false)
    }
}

pub(crate) fn exp_vec(x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
    let norm = v.norm();
    let out = if norm < SERIES_SWITCH {
        x + v
    } else {
        x * norm.cos() + v * (norm.sin() / norm)
    };
    let n = out.norm();
    out / n
}

/// Logarithm on the sphere; `None` when the pair is within `guard` of
/// antipodal.
pub(crate) fn log_vec(x: &DVector<f64>, y: &DVector<f64>, guard: f64) -> Option<DVector<f64>> {
    let theta = unit_angle(x.iter(), y.iter());
    if theta > std::f64::consts::PI - guard {
        return None;
    }
    let w = y - x * x.dot(y);
    if theta < SERIES_SWITCH {
        return Some(w);
    }
    let wn = w.norm();
    if wn == 0.0 {
        return Some(w);
    }
    Some(w * (theta / wn))
}

pub fn sphere_dist(x: &SpherePoint, y: &SpherePoint) -> Result<f64> {
    if x.dim() != y.dim() {
        return Err(invalid("sphere points of different dimension"));
    }
    Ok(unit_angle(x.coords().iter(), y.coords().iter()))
}

pub fn sphere_exp(v: &SphereTangent) -> SpherePoint {
    SpherePoint(exp_vec(v.base.coords(), &v.vec))
}

/// Logarithm `Log_x(y)`, refused within `guard` of the antipode.
pub fn sphere_log(x: &SpherePoint, y: &SpherePoint, guard: f64) -> Result<SphereTangent> {
    if x.dim() != y.dim() {
        return Err(invalid("sphere points of different dimension"));
    }
    let vec = log_vec(x.coords(), y.coords(), guard)
        .ok_or(GeomError::AntipodalLogarithm { row: None })?;
    Ok(SphereTangent {
        base: x.clone(),
        vec,
    })
}

pub fn sphere_project(x: &SpherePoint, w: &DVector<f64>) -> Result<SphereTangent> {
    if w.len() != x.dim() {
        return Err(invalid("vector dimension mismatch"));
    }
    let vec = w - x.coords() * x.coords().dot(w);
    Ok(SphereTangent {
        base: x.clone(),
        vec,
    })
}

/// Metric-projection retraction `(x + v)/‖x + v‖`.
pub fn sphere_retract(v: &SphereTangent) -> Result<SpherePoint> {
    let sum = v.base.coords() + &v.vec;
    let n = sum.norm();
    if !(n > 0.0) {
        return Err(GeomError::RetractionFailure(
            "x + v vanishes on the sphere".into(),
        ));
    }
    Ok(SpherePoint(sum / n))
}

/// `Σ wᵢ·θ²(pᵢ, x)`.
pub fn frechet_loss(x: &DVector<f64>, points: &[DVector<f64>], weights: &[f64]) -> f64 {
    points
        .iter()
        .zip(weights)
        .map(|(p, w)| {
            let t = unit_angle(p.iter(), x.iter());
            w * t * t
        })
        .sum()
}

/// Riemannian gradient of [`frechet_loss`] at `x`:
/// `(I - xxᵀ)·Σ wᵢ·(-2θᵢ/sin θᵢ)·pᵢ`. The flag is set when some `θᵢ/sin θᵢ`
/// hit the cap (a point nearly antipodal to `x`).
pub fn frechet_gradient(
    x: &DVector<f64>,
    points: &[DVector<f64>],
    weights: &[f64],
) -> (DVector<f64>, bool) {
    let mut euclid = DVector::zeros(x.len());
    let mut clamped = false;
    for (p, w) in points.iter().zip(weights) {
        let theta = unit_angle(p.iter(), x.iter());
        let (ratio, hit) = angle_ratio(theta);
        clamped |= hit;
        euclid.axpy(-2.0 * w * ratio, p, 1.0);
    }
    let radial = x.dot(&euclid);
    (euclid - x * radial, clamped)
}

/// Result of a weighted Fréchet mean computation on one sphere.
#[derive(Debug, Clone)]
pub struct SphereMean {
    pub point: SpherePoint,
    pub report: SolverReport,
    /// Some input was close enough to antipodal that the gradient was clamped.
    pub clamped: bool,
}

/// Weighted Fréchet mean on the sphere by Riemannian gradient descent with
/// the normalization retraction and Armijo backtracking. Returns a critical
/// point; no uniqueness claim is made.
pub fn weighted_frechet_mean(
    points: &[SpherePoint],
    weights: &[f64],
    init: Option<&SpherePoint>,
    cfg: &SolverConfig,
) -> Result<SphereMean> {
    if points.is_empty() {
        return Err(invalid("Fréchet mean of an empty set"));
    }
    if points.len() != weights.len() {
        return Err(invalid("points and weights differ in length"));
    }
    let dim = points[0].dim();
    if points.iter().any(|p| p.dim() != dim) {
        return Err(invalid("points of different dimension"));
    }
    let weights = normalized_weights(weights)?;
    let raw: Vec<DVector<f64>> = points.iter().map(|p| p.coords().clone()).collect();
    let start = match init {
        Some(p) if p.dim() == dim => p.coords().clone(),
        Some(_) => return Err(invalid("initial point has the wrong dimension")),
        None => euclidean_start(&raw, &weights),
    };
    let (x, report, clamped) = descend_mean(&raw, &weights, start, cfg);
    Ok(SphereMean {
        point: SpherePoint(x),
        report,
        clamped,
    })
}

pub(crate) fn normalized_weights(weights: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(invalid(format!(
            "weights must be positive and finite, got {bad}"
        )));
    }
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().map(|w| w / total).collect())
}

/// Normalized weighted Euclidean mean, or the first point when the mean
/// nearly cancels.
pub(crate) fn euclidean_start(points: &[DVector<f64>], weights: &[f64]) -> DVector<f64> {
    let mut acc = DVector::zeros(points[0].len());
    for (p, w) in points.iter().zip(weights) {
        acc.axpy(*w, p, 1.0);
    }
    let n = acc.norm();
    if n < 1e-8 {
        points[0].clone()
    } else {
        acc / n
    }
}

pub(crate) fn descend_mean(
    points: &[DVector<f64>],
    weights: &[f64],
    start: DVector<f64>,
    cfg: &SolverConfig,
) -> (DVector<f64>, SolverReport, bool) {
    let armijo = &cfg.armijo;
    let mut initial_step = armijo.initial_step;
    let mut x = start;
    let mut loss = frechet_loss(&x, points, weights);
    let mut clamped_any = false;
    let mut iterations = 0;
    let mut stagnated = false;
    let (mut grad, c) = frechet_gradient(&x, points, weights);
    clamped_any |= c;
    let mut gnorm = grad.norm();

    while gnorm > cfg.grad_tol && iterations < cfg.max_iters {
        let mut step = initial_step;
        let mut accepted = None;
        for _ in 0..=armijo.max_backtracks {
            let trial = &x - &grad * step;
            let tn = trial.norm();
            if tn > 0.0 {
                let trial = trial / tn;
                let trial_loss = frechet_loss(&trial, points, weights);
                if trial_loss <= loss - armijo.sufficient_decrease * step * gnorm * gnorm {
                    accepted = Some((trial, trial_loss));
                    break;
                }
            }
            step *= armijo.backtrack;
        }
        match accepted {
            Some((next, next_loss)) => {
                let s = &next - &x;
                x = next;
                loss = next_loss;
                iterations += 1;
                let (g, c) = frechet_gradient(&x, points, weights);
                clamped_any |= c;
                initial_step = bb_step(s.norm_squared(), s.dot(&(&g - &grad)), armijo.initial_step);
                grad = g;
                gnorm = grad.norm();
            }
            None => {
                stagnated = true;
                break;
            }
        }
    }
    let converged = gnorm <= cfg.grad_tol || (stagnated && gnorm <= noise_floor(loss));
    let report = SolverReport {
        loss,
        grad_norm: gnorm,
        iterations,
        converged,
        stagnated: stagnated && !converged,
    };
    (x, report, clamped_any)
}
