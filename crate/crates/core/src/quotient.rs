//! The orbit space `Π^m S^{k-1} / O(k)`.
//!
//! Points are orbits `[X] = {XO : O ∈ O(k)}`, represented by any member.
//! The orbit distance is `inf_O d(XO, Y)`, computed by Riemannian gradient
//! descent on `O(k)` (QR retraction, Armijo steps) started from the
//! Procrustes solution and from seeded random rotations. Logarithms align
//! the target first and then take the product-sphere logarithm to the
//! aligned representative.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::config::{bb_step, noise_floor, SolverConfig, SolverReport};
use crate::error::{invalid, GeomError, Result};
use crate::fixed_rank::vertical_norm;
use crate::kernels::{
    numerical_rank, procrustes, procrustes_reflected, singular_extremes, RankTolerance,
};
use crate::orthogonal::{armijo_from, skew, OrthogonalMatrix};
use crate::product_sphere::{dist_sq_raw, ps_exp, ps_log, ProductTangent, UnitRowMatrix};
use crate::sphere::{angle_ratio, unit_angle};

/// An orbit `[X]`, stored through one representative.
#[derive(Debug, Clone, PartialEq)]
pub struct OrbitPoint {
    rep: UnitRowMatrix,
}

impl OrbitPoint {
    pub fn new(rep: UnitRowMatrix) -> Self {
        Self { rep }
    }

    pub fn rep(&self) -> &UnitRowMatrix {
        &self.rep
    }

    pub fn into_rep(self) -> UnitRowMatrix {
        self.rep
    }

    pub fn m(&self) -> usize {
        self.rep.nrows()
    }

    pub fn k(&self) -> usize {
        self.rep.ncols()
    }

    pub fn rank(&self, tol: RankTolerance) -> usize {
        numerical_rank(self.rep.as_matrix(), tol)
    }
}

impl From<UnitRowMatrix> for OrbitPoint {
    fn from(rep: UnitRowMatrix) -> Self {
        Self::new(rep)
    }
}

/// Outcome of aligning `Y` onto `X`.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// Minimizer `O*` of `ℓ(O) = Σᵢ θ²((XO)ᵢ, Yᵢ)`.
    pub rotation: OrthogonalMatrix,
    /// `Y·O*ᵀ`, the member of `[Y]` registered with `X`.
    pub aligned: UnitRowMatrix,
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stagnated: bool,
    pub restarts_used: usize,
    /// Some row pair was nearly antipodal and its gradient weight was capped.
    pub clamped: bool,
}

impl AlignmentResult {
    pub fn distance(&self) -> f64 {
        self.loss.max(0.0).sqrt()
    }

    pub fn report(&self) -> SolverReport {
        SolverReport {
            loss: self.loss,
            grad_norm: self.grad_norm,
            iterations: self.iterations,
            converged: self.converged,
            stagnated: self.stagnated,
        }
    }
}

fn check_pair(x: &UnitRowMatrix, y: &UnitRowMatrix) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(invalid(format!(
            "orbit points have different shapes: {:?} vs {:?}",
            x.shape(),
            y.shape()
        )));
    }
    Ok(())
}

/// `ℓ_{X,Y}(O) = Σᵢ θ²((XO)ᵢ, Yᵢ)`.
pub fn alignment_loss(x: &UnitRowMatrix, y: &UnitRowMatrix, o: &OrthogonalMatrix) -> f64 {
    dist_sq_raw(&(x.as_matrix() * o.as_matrix()), y.as_matrix())
}

/// Loss and Riemannian gradient of `ℓ_{X,Y}` at `O`:
/// `O·skew(Oᵀ Σᵢ (-2θᵢ/sin θᵢ)·XᵢYᵢᵀ)` with `θᵢ = θ((XO)ᵢ, Yᵢ)`.
/// The flag reports whether some `θᵢ/sin θᵢ` was capped.
pub fn alignment_gradient(
    x: &UnitRowMatrix,
    y: &UnitRowMatrix,
    o: &OrthogonalMatrix,
) -> (f64, DMatrix<f64>, bool) {
    gradient_raw(x.as_matrix(), y.as_matrix(), o.as_matrix())
}

fn gradient_raw(x: &DMatrix<f64>, y: &DMatrix<f64>, o: &DMatrix<f64>) -> (f64, DMatrix<f64>, bool) {
    let xo = x * o;
    let mut loss = 0.0;
    let mut clamped = false;
    let mut weighted_y = y.clone();
    for i in 0..x.nrows() {
        let theta = unit_angle(xo.row(i).iter(), y.row(i).iter());
        loss += theta * theta;
        let (ratio, hit) = angle_ratio(theta);
        clamped |= hit;
        weighted_y.row_mut(i).scale_mut(-2.0 * ratio);
    }
    let euclid = x.transpose() * weighted_y;
    let grad = o * skew(&(o.transpose() * euclid));
    (loss, grad, clamped)
}

struct Descent {
    rotation: OrthogonalMatrix,
    report: SolverReport,
    clamped: bool,
}

fn descend(
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    start: OrthogonalMatrix,
    cfg: &SolverConfig,
) -> Result<Descent> {
    let loss_fn = |o: &OrthogonalMatrix| dist_sq_raw(&(x * o.as_matrix()), y);
    let mut o = start;
    let (mut loss, mut grad, mut clamped) = gradient_raw(x, y, o.as_matrix());
    let mut gnorm = grad.norm();
    let mut iterations = 0;
    let mut stagnated = false;
    let mut armijo = cfg.armijo;
    while gnorm > cfg.grad_tol && iterations < cfg.max_iters {
        let step = armijo_from(&loss_fn, &o, loss, &(-&grad), &armijo)?;
        if step.stagnated {
            stagnated = true;
            break;
        }
        let s = step.next.as_matrix() - o.as_matrix();
        o = step.next;
        iterations += 1;
        let (l, g, c) = gradient_raw(x, y, o.as_matrix());
        let change = &g - &grad;
        armijo.initial_step = bb_step(s.norm_squared(), s.dot(&change), cfg.armijo.initial_step);
        loss = l;
        grad = g;
        clamped |= c;
        gnorm = grad.norm();
    }
    let converged = gnorm <= cfg.grad_tol || (stagnated && gnorm <= noise_floor(loss));
    Ok(Descent {
        rotation: o,
        report: SolverReport {
            loss,
            grad_norm: gnorm,
            iterations,
            converged,
            stagnated: stagnated && !converged,
        },
        clamped,
    })
}

/// Aligns `[Y]` onto `X` by minimizing `ℓ_{X,Y}` over `O(k)`.
pub fn align(x: &OrbitPoint, y: &OrbitPoint, cfg: &SolverConfig) -> Result<AlignmentResult> {
    align_with_starts(x.rep(), y.rep(), cfg, &[])
}

/// As [`align`], with extra starting rotations tried after the two
/// Procrustes starts (one per component of `O(k)`) and before the random
/// ones. The best local minimum is kept, so
/// the returned loss never exceeds `ℓ` at any supplied start.
pub fn align_with_starts(
    x: &UnitRowMatrix,
    y: &UnitRowMatrix,
    cfg: &SolverConfig,
    extra_starts: &[OrthogonalMatrix],
) -> Result<AlignmentResult> {
    check_pair(x, y)?;
    let k = x.ncols();
    if extra_starts.iter().any(|o| o.dim() != k) {
        return Err(invalid("starting rotation has the wrong size"));
    }
    let mut starts = vec![procrustes(x, y)?];
    if cfg.restarts > 1 {
        starts.push(procrustes_reflected(x, y)?);
    }
    starts.extend(extra_starts.iter().cloned());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 2..cfg.restarts {
        starts.push(OrthogonalMatrix::random(k, &mut rng));
    }

    let (xm, ym) = (x.as_matrix(), y.as_matrix());
    let runs: Vec<Descent> = starts
        .into_par_iter()
        .map(|s| descend(xm, ym, s, cfg))
        .collect::<Result<_>>()?;
    let restarts_used = runs.len();
    let best = runs
        .into_iter()
        .reduce(|best, r| {
            if r.report.loss < best.report.loss {
                r
            } else {
                best
            }
        })
        .expect("at least one start");

    let aligned = UnitRowMatrix::from_matrix_unchecked(ym * best.rotation.as_matrix().transpose());
    Ok(AlignmentResult {
        rotation: best.rotation,
        aligned,
        loss: best.report.loss,
        grad_norm: best.report.grad_norm,
        iterations: best.report.iterations,
        converged: best.report.converged,
        stagnated: best.report.stagnated,
        restarts_used,
        clamped: best.clamped,
    })
}

/// Orbit distance with the alignments that produced it.
#[derive(Debug, Clone)]
pub struct OrbitDistance {
    pub distance: f64,
    pub forward: AlignmentResult,
    /// Alignment of `[X]` onto `Y`, present when symmetrization is on.
    pub backward: Option<AlignmentResult>,
}

impl OrbitDistance {
    pub fn converged(&self) -> bool {
        self.forward.converged && self.backward.as_ref().map_or(true, |b| b.converged)
    }
}

pub fn orbit_distance(x: &OrbitPoint, y: &OrbitPoint, cfg: &SolverConfig) -> Result<OrbitDistance> {
    let forward = align(x, y, cfg)?;
    let backward = if cfg.symmetrize {
        Some(align(y, x, cfg)?)
    } else {
        None
    };
    let loss = backward
        .as_ref()
        .map_or(forward.loss, |b| b.loss.min(forward.loss));
    Ok(OrbitDistance {
        distance: loss.max(0.0).sqrt(),
        forward,
        backward,
    })
}

pub fn orbit_dist(x: &OrbitPoint, y: &OrbitPoint, cfg: &SolverConfig) -> Result<f64> {
    Ok(orbit_distance(x, y, cfg)?.distance)
}

/// A logarithm of `[Y]` at `X` with its horizontality diagnostics.
#[derive(Debug, Clone)]
pub struct OrbitLog {
    pub tangent: ProductTangent,
    /// `‖P^v_X(V)‖_F`; `None` when `X` is rank-deficient.
    pub vertical_residual: Option<f64>,
    /// The vertical residual is within `horiz_tol·max(1, ‖V‖)`.
    pub horizontal: bool,
    pub alignment: AlignmentResult,
}

/// Logarithm of `[Y]` at `X`: aligns `Y` to `X`, then takes the
/// product-sphere logarithm to the registered representative.
pub fn orbit_log(x: &OrbitPoint, y: &OrbitPoint, cfg: &SolverConfig) -> Result<OrbitLog> {
    let mut alignment = align(x, y, cfg)?;
    if cfg.symmetrize {
        let back = align(y, x, cfg)?;
        if back.loss < alignment.loss {
            // Aligning X onto Y by O' registers Y·O' with X.
            let rotation = back.rotation.transpose();
            let aligned = UnitRowMatrix::from_matrix_unchecked(
                y.rep().as_matrix() * back.rotation.as_matrix(),
            );
            alignment = AlignmentResult {
                rotation,
                aligned,
                ..back
            };
        }
    }
    if !alignment.converged {
        return Err(GeomError::AlignmentStagnation {
            grad_norm: alignment.grad_norm,
            iterations: alignment.iterations,
        });
    }
    let tangent = ps_log(x.rep(), &alignment.aligned, cfg.antipodal_guard)?;
    let vertical_residual = vertical_norm(x.rep(), tangent.vec()).ok();
    let horizontal =
        vertical_residual.is_some_and(|r| r <= cfg.horiz_tol * tangent.norm().max(1.0));
    Ok(OrbitLog {
        tangent,
        vertical_residual,
        horizontal,
        alignment,
    })
}

/// `[Exp_X(tV)]`. With `require_horizontal` set, `V` must pass the
/// horizontality check at `X`.
pub fn orbit_exp(
    x: &OrbitPoint,
    v: &ProductTangent,
    t: f64,
    cfg: &SolverConfig,
) -> Result<OrbitPoint> {
    if v.base() != x.rep() {
        return Err(invalid("velocity is not based at the orbit representative"));
    }
    if cfg.require_horizontal {
        let r = vertical_norm(x.rep(), v.vec())?;
        if r > cfg.horiz_tol * v.norm().max(1.0) {
            return Err(invalid(format!(
                "velocity is not horizontal (vertical part {r:e})"
            )));
        }
    }
    Ok(OrbitPoint::new(ps_exp(v, t)))
}

/// `t ↦ [Exp_start(t·velocity)]` for `t ∈ [0, duration]`.
#[derive(Debug, Clone)]
pub struct GeodesicSegment {
    pub start: UnitRowMatrix,
    pub velocity: ProductTangent,
    pub duration: f64,
}

impl GeodesicSegment {
    pub fn new(velocity: ProductTangent, duration: f64) -> Self {
        Self {
            start: velocity.base().clone(),
            velocity,
            duration,
        }
    }

    /// The segment from `[X]` to `[Y]` given by a logarithm, on `[0, 1]`.
    pub fn between(x: &OrbitPoint, y: &OrbitPoint, cfg: &SolverConfig) -> Result<Self> {
        let log = orbit_log(x, y, cfg)?;
        Ok(Self::new(log.tangent, 1.0))
    }

    pub fn point_at(&self, t: f64) -> UnitRowMatrix {
        ps_exp(&self.velocity, t)
    }
}

/// Numerical ranks sampled along a geodesic segment.
#[derive(Debug, Clone, PartialEq)]
pub struct RankProfile {
    pub start: (f64, usize),
    pub end: (f64, usize),
    pub interior: Vec<(f64, usize)>,
}

impl RankProfile {
    /// The common interior rank, if all interior samples agree.
    pub fn interior_rank(&self) -> Option<usize> {
        let first = self.interior.first()?.1;
        self.interior
            .iter()
            .all(|(_, r)| *r == first)
            .then_some(first)
    }
}

/// Ranks at `samples` equally spaced interior times, plus both endpoints.
pub fn geodesic_rank_profile(
    seg: &GeodesicSegment,
    samples: usize,
    tol: RankTolerance,
) -> Result<RankProfile> {
    if samples < 2 {
        return Err(invalid("need at least two interior samples"));
    }
    let rank_at = |t: f64| numerical_rank(seg.point_at(t).as_matrix(), tol);
    let interior = (1..=samples)
        .map(|i| {
            let t = seg.duration * i as f64 / (samples + 1) as f64;
            (t, rank_at(t))
        })
        .collect();
    Ok(RankProfile {
        start: (0.0, rank_at(0.0)),
        end: (seg.duration, rank_at(seg.duration)),
        interior,
    })
}

const ESCAPE_GRID: usize = 4000;
const INTERVAL_RESOLUTION: f64 = 1e-7;

/// Estimates the largest interval `(t_min, t_max) ∋ 0` inside
/// `[-t_max_search, t_max_search]` on which `Exp_X(tV)` keeps rank `k`.
///
/// Rank loss along a curve is usually a touching event rather than a sign
/// change, so each side is scanned on a grid for local minima of
/// `σ_min - threshold(σ_max)`; every minimum is refined by golden-section
/// search, and the first one reaching zero is bracketed by bisection.
/// Returns `±t_max_search` on a side without rank loss.
pub fn max_full_rank_interval(
    x: &OrbitPoint,
    v: &ProductTangent,
    t_max_search: f64,
    tol: RankTolerance,
) -> Result<(f64, f64)> {
    if v.base() != x.rep() {
        return Err(invalid(
            "direction is not based at the orbit representative",
        ));
    }
    if !(t_max_search > 0.0 && t_max_search.is_finite()) {
        return Err(invalid("search radius must be positive and finite"));
    }
    let k = x.k();
    let rank = x.rank(tol);
    if rank < k {
        return Err(invalid(format!("base point has rank {rank} < k = {k}")));
    }
    if v.norm() == 0.0 {
        return Ok((-t_max_search, t_max_search));
    }
    let margin = |t: f64| {
        let (lo, hi) = singular_extremes(ps_exp(v, t).as_matrix());
        lo - tol.threshold(hi)
    };
    let forward = first_rank_drop(&margin, t_max_search).unwrap_or(t_max_search);
    let backward = first_rank_drop(&|t| margin(-t), t_max_search).unwrap_or(t_max_search);
    Ok((-backward, forward))
}

fn first_rank_drop<F: Fn(f64) -> f64>(margin: &F, t_max: f64) -> Option<f64> {
    let h = t_max / ESCAPE_GRID as f64;
    let values: Vec<f64> = (0..=ESCAPE_GRID).map(|i| margin(i as f64 * h)).collect();
    for i in 1..=ESCAPE_GRID {
        let t = i as f64 * h;
        if values[i] <= 0.0 {
            return Some(bisect_drop(margin, t - h, t));
        }
        let is_local_min =
            values[i] <= values[i - 1] && (i == ESCAPE_GRID || values[i] <= values[i + 1]);
        if is_local_min {
            let hi = (t + h).min(t_max);
            let (t_star, value) = golden_min(margin, t - h, hi);
            if value <= 0.0 {
                return Some(bisect_drop(margin, t - h, t_star));
            }
        }
    }
    None
}

/// `margin(lo) > 0`, `margin(hi) <= 0`; shrinks the bracket to the
/// resolution and returns its midpoint.
fn bisect_drop<F: Fn(f64) -> f64>(margin: &F, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > INTERVAL_RESOLUTION {
        let mid = 0.5 * (lo + hi);
        if margin(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if b - a <= 1e-14 * (1.0 + a.abs()) || fc <= 0.0 || fd <= 0.0 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Embeds `[X]` into the orbit space with `k2 ≥ k` columns by zero padding;
/// the Gram matrix `XXᵀ` is unchanged.
pub fn k_embedding(x: &OrbitPoint, k2: usize) -> Result<OrbitPoint> {
    let (m, k) = x.rep().shape();
    if k2 < k {
        return Err(invalid(format!("cannot embed k = {k} into k2 = {k2}")));
    }
    let mut padded = DMatrix::zeros(m, k2);
    padded
        .view_mut((0, 0), (m, k))
        .copy_from(x.rep().as_matrix());
    Ok(OrbitPoint::new(UnitRowMatrix::from_matrix_unchecked(
        padded,
    )))
}

/// A unit-speed horizontal direction whose geodesic leaves the full-rank
/// stratum at `escape_time`.
#[derive(Debug, Clone)]
pub struct EscapeDirection {
    pub direction: ProductTangent,
    pub escape_time: f64,
    /// Rank-deficient representative reached at `escape_time`.
    pub target: UnitRowMatrix,
}

/// Builds a geodesic from a full-rank `[X]` that loses rank in finite time:
/// it heads for the rank-`(k-1)` orbit obtained by projecting every row onto
/// the top `k-1` right singular directions of `X`.
pub fn finite_escape_direction(x: &OrbitPoint, cfg: &SolverConfig) -> Result<EscapeDirection> {
    let (m, k) = x.rep().shape();
    if x.rank(cfg.rank_tol) < k {
        return Err(invalid("base point is not full rank"));
    }
    let svd = x.rep().as_matrix().clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| invalid("SVD did not return right singular vectors"))?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let basis: Vec<_> = order[..k - 1]
        .iter()
        .map(|&i| v_t.row(i).transpose())
        .collect();

    let mut target = DMatrix::zeros(m, k);
    for i in 0..m {
        let row = x.rep().row_vector(i);
        let mut proj = nalgebra::DVector::zeros(k);
        for b in &basis {
            proj.axpy(b.dot(&row), b, 1.0);
        }
        if proj.norm() < 1e-12 {
            proj = basis[0].clone();
        }
        let n = proj.norm();
        target.set_row(i, &(proj / n).transpose());
    }
    let target = UnitRowMatrix::from_matrix_unchecked(target);
    let log = orbit_log(x, &OrbitPoint::new(target), cfg)?;
    let escape_time = log.tangent.norm();
    if escape_time == 0.0 {
        return Err(invalid("base point already lies on the target orbit"));
    }
    let reached = log.alignment.aligned.clone();
    Ok(EscapeDirection {
        direction: log.tangent.scaled(1.0 / escape_time),
        escape_time,
        target: reached,
    })
}
