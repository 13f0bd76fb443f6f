//! Solver settings shared by the alignment, mean and line-search routines,
//! plus the per-run diagnostics they report back.

use serde::{Deserialize, Serialize};

use crate::kernels::RankTolerance;

/// Backtracking line-search constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmijoConfig {
    pub initial_step: f64,
    pub backtrack: f64,
    pub sufficient_decrease: f64,
    pub max_backtracks: usize,
}

impl Default for ArmijoConfig {
    fn default() -> Self {
        Self {
            initial_step: 1.0,
            backtrack: 0.5,
            sufficient_decrease: 1e-4,
            max_backtracks: 30,
        }
    }
}

/// Every tolerance, cap and seed used by the solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop when the Riemannian gradient norm falls below this.
    pub grad_tol: f64,
    /// Iteration cap for a single gradient-descent run.
    pub max_iters: usize,
    pub armijo: ArmijoConfig,
    /// Number of alignment starts: the Procrustes solution, its best
    /// counterpart of opposite determinant, then random orthogonal starts.
    pub restarts: usize,
    pub seed: u64,
    /// Report the orbit distance as the minimum over both argument orders.
    pub symmetrize: bool,
    /// Relative outer-loss change that stops the Fréchet mean iteration.
    pub mean_tol: f64,
    pub max_outer: usize,
    /// Bound on the vertical component of an emitted logarithm, relative
    /// to `max(1, ‖V‖)`.
    pub horiz_tol: f64,
    /// Reject non-horizontal velocities in `orbit_exp`.
    pub require_horizontal: bool,
    /// Two orbit points closer than this are treated as equal.
    pub equality_tol: f64,
    pub rank_tol: RankTolerance,
    /// Logarithms are refused when a row angle exceeds `π - antipodal_guard`.
    pub antipodal_guard: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grad_tol: 1e-8,
            max_iters: 500,
            armijo: ArmijoConfig::default(),
            restarts: 5,
            seed: 0,
            symmetrize: true,
            mean_tol: 1e-10,
            max_outer: 200,
            horiz_tol: 1e-8,
            require_horizontal: false,
            equality_tol: 1e-8,
            rank_tol: RankTolerance::default(),
            antipodal_guard: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }
}

/// Convergence diagnostics of one gradient-descent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub loss: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The line search could not find a decrease before the iteration cap.
    pub stagnated: bool,
}

/// Gradient norm below which a failed line search is attributed to rounding
/// in the loss rather than to a genuine lack of progress.
pub(crate) fn noise_floor(loss: f64) -> f64 {
    1e-6 * loss.abs().max(1.0).sqrt()
}

/// Barzilai–Borwein trial step `⟨s,s⟩/⟨s,y⟩` from the last displacement `s`
/// and gradient change `y`, or `fallback` when the curvature estimate is
/// not positive.
pub(crate) fn bb_step(ss: f64, sy: f64, fallback: f64) -> f64 {
    if sy > 0.0 && ss > 0.0 && (ss / sy).is_finite() {
        (ss / sy).clamp(1e-8, 1e8)
    } else {
        fallback
    }
}
