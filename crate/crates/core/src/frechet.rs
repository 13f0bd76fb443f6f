//! Weighted Fréchet means in the orbit space by alternating minimization:
//! register every sample with the current mean, then replace the mean by
//! the product-sphere mean of the registered representatives.

use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{invalid, GeomError, Result};
use crate::kernels::procrustes;
use crate::product_sphere::{dist_sq_raw, ps_frechet_fixed_from, UnitRowMatrix};
use crate::quotient::{align_with_starts, orbit_dist, OrbitPoint};

const SAMPLE_SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Orbit points with positive weights.
#[derive(Debug, Clone)]
pub struct WeightedSampleSet {
    points: Vec<OrbitPoint>,
    weights: Vec<f64>,
}

impl WeightedSampleSet {
    pub fn new(points: Vec<OrbitPoint>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(invalid("sample set is empty"));
        }
        if points.len() != weights.len() {
            return Err(invalid(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(invalid(format!("weight {i} is not positive: {w}")));
        }
        let shape = points[0].rep().shape();
        if let Some(i) = points.iter().position(|p| p.rep().shape() != shape) {
            return Err(invalid(format!("sample {i} has a different shape")));
        }
        Ok(Self { points, weights })
    }

    pub fn uniform(points: Vec<OrbitPoint>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0; n])
    }

    pub fn points(&self) -> &[OrbitPoint] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct MeanReport {
    pub mean: OrbitPoint,
    /// `Σ wᵢ d²(Xⁱ Rᵢ, M)` after initialization and after every outer step.
    pub loss_history: Vec<f64>,
    pub outer_iterations: usize,
    /// The outer loss stopped changing; this is stationarity, not a
    /// certificate of a global minimum.
    pub converged: bool,
    /// Sample representatives registered with the final mean.
    pub registered: Vec<UnitRowMatrix>,
    /// Index of the sample the iteration started from.
    pub initial_sample: usize,
}

impl MeanReport {
    pub fn final_loss(&self) -> f64 {
        *self.loss_history.last().expect("history is never empty")
    }
}

fn sample_config(cfg: &SolverConfig, index: usize) -> SolverConfig {
    cfg.clone().with_seed(
        cfg.seed
            .wrapping_add((index as u64).wrapping_mul(SAMPLE_SEED_STRIDE)),
    )
}

fn weighted_loss(mean: &UnitRowMatrix, registered: &[UnitRowMatrix], weights: &[f64]) -> f64 {
    registered
        .iter()
        .zip(weights)
        .map(|(r, w)| w * dist_sq_raw(mean.as_matrix(), r.as_matrix()))
        .sum()
}

/// `Σᵢ wᵢ d²([Xⁱ], [candidate])`.
pub fn frechet_variance(
    samples: &WeightedSampleSet,
    candidate: &OrbitPoint,
    cfg: &SolverConfig,
) -> Result<f64> {
    if candidate.rep().shape() != samples.points[0].rep().shape() {
        return Err(invalid("candidate shape does not match the samples"));
    }
    let terms: Vec<f64> = samples
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            orbit_dist(p, candidate, &sample_config(cfg, i)).map_err(|e| GeomError::Sample {
                index: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    Ok(terms
        .iter()
        .zip(&samples.weights)
        .map(|(d, w)| w * d * d)
        .sum())
}

/// Registers each sample with `mean`, starting from its previous rotation
/// so the loss cannot increase.
fn register(
    mean: &UnitRowMatrix,
    samples: &WeightedSampleSet,
    previous: &[UnitRowMatrix],
    cfg: &SolverConfig,
) -> Result<Vec<UnitRowMatrix>> {
    samples
        .points
        .par_iter()
        .zip(previous)
        .enumerate()
        .map(|(i, (p, prev))| {
            let wrap = |e| GeomError::Sample {
                index: i,
                source: Box::new(e),
            };
            // prev = Xⁱ·R, so starting the mean-side rotation at Rᵀ reproduces it
            let warm = procrustes(prev, p.rep()).map_err(wrap)?;
            let a =
                align_with_starts(mean, p.rep(), &sample_config(cfg, i), &[warm]).map_err(wrap)?;
            Ok(a.aligned)
        })
        .collect()
}

/// Weighted Fréchet mean of the sample orbits.
pub fn frechet_mean(samples: &WeightedSampleSet, cfg: &SolverConfig) -> Result<MeanReport> {
    let n = samples.len();
    let initial_sample = if n == 1 {
        0
    } else {
        let mut best = (0, f64::INFINITY);
        for (i, p) in samples.points.iter().enumerate() {
            let v = frechet_variance(samples, p, cfg)?;
            if v < best.1 {
                best = (i, v);
            }
        }
        best.0
    };
    let mut mean = samples.points[initial_sample].rep().clone();

    let mut registered: Vec<UnitRowMatrix> = samples
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let o = procrustes(&mean, p.rep()).map_err(|e| GeomError::Sample {
                index: i,
                source: Box::new(e),
            })?;
            Ok(p.rep().act(&o.transpose()))
        })
        .collect::<Result<_>>()?;
    let mut loss = weighted_loss(&mean, &registered, &samples.weights);
    let mut loss_history = vec![loss];
    let mut outer_iterations = 0;
    let mut converged = false;

    while outer_iterations < cfg.max_outer {
        registered = register(&mean, samples, &registered, cfg)?;
        let step = ps_frechet_fixed_from(&registered, &samples.weights, cfg, Some(&mean))?;
        let next_loss = weighted_loss(&step.mean, &registered, &samples.weights);
        outer_iterations += 1;
        // the row solver keeps the warm start unless it finds a lower loss
        let (next_mean, next_loss) = if next_loss <= loss {
            (step.mean, next_loss)
        } else {
            (
                mean.clone(),
                weighted_loss(&mean, &registered, &samples.weights),
            )
        };
        let change = (loss - next_loss).abs();
        let scale = loss.max(1.0);
        mean = next_mean;
        loss = next_loss;
        loss_history.push(loss);
        if change <= cfg.mean_tol * scale {
            converged = true;
            break;
        }
    }

    Ok(MeanReport {
        mean: OrbitPoint::new(mean),
        loss_history,
        outer_iterations,
        converged,
        registered,
        initial_sample,
    })
}
