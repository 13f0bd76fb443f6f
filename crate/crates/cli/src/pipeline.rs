//! Cohort-level steps: load and align columns across subjects, factorize,
//! pairwise orbit distances, group means and difference matrices.

use std::collections::BTreeSet;

use corrgeom::quotient::orbit_distance;
use corrgeom::{
    factorize, frechet_mean, gram, CorrelationMatrix, OrbitPoint, SolverConfig, WeightedSampleSet,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{PipelineError, Result};
use crate::manifest::CohortManifest;
use crate::table::{correlation_of, ingest};

#[derive(Debug, Clone)]
pub struct Subject {
    pub id: String,
    pub group: String,
    pub correlation: CorrelationMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: String,
}

/// Subjects restricted to a shared column set, sorted by id.
#[derive(Debug, Clone)]
pub struct Cohort {
    pub columns: Vec<String>,
    pub subjects: Vec<Subject>,
    pub excluded: Vec<Exclusion>,
}

impl Cohort {
    pub fn ids(&self) -> Vec<String> {
        self.subjects.iter().map(|s| s.id.clone()).collect()
    }
}

/// Ingests every subject, applies the zero-variance policy, and keeps the
/// columns that are non-constant in every remaining subject. Column order
/// follows the first subject by id, so it does not depend on manifest order.
pub fn load_cohort(manifest: &CohortManifest) -> Result<Cohort> {
    let mut entries = manifest.subjects.clone();
    entries.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let tables = entries
        .par_iter()
        .map(|e| ingest(&e.path, &e.subject_id))
        .collect::<Result<Vec<_>>>()?;

    let mut excluded = Vec::new();
    let mut kept = Vec::new();
    for (entry, table) in entries.iter().zip(tables) {
        let zero = table.zero_variance_columns();
        match manifest.drop_policy.max_zero_variance {
            Some(max) if zero.len() > max => excluded.push(Exclusion {
                subject_id: entry.subject_id.clone(),
                reason: format!("{} zero-variance columns (limit {max})", zero.len()),
            }),
            _ => kept.push((entry, table, zero)),
        }
    }
    let Some((_, first, _)) = kept.first() else {
        return Err(PipelineError::DegenerateInput(
            "every subject was excluded".into(),
        ));
    };
    let columns: Vec<String> = first
        .column_names
        .iter()
        .filter(|c| {
            kept.iter()
                .all(|(_, t, zero)| t.column_names.contains(c) && !zero.contains(c))
        })
        .cloned()
        .collect();
    if columns.is_empty() {
        return Err(PipelineError::DegenerateInput(
            "no column is usable in every subject".into(),
        ));
    }
    let subjects = kept
        .par_iter()
        .map(|(entry, table, _)| {
            let c = correlation_of(table, Some(&columns))?;
            // correlation_of keeps the table's order; reorder to `columns`
            let order: Vec<usize> = columns
                .iter()
                .map(|name| {
                    c.kept
                        .iter()
                        .position(|k| k == name)
                        .expect("shared column")
                })
                .collect();
            let z = DMatrix::from_fn(order.len(), order.len(), |i, j| {
                c.matrix.entries()[(order[i], order[j])]
            });
            Ok(Subject {
                id: entry.subject_id.clone(),
                group: entry.group.clone(),
                correlation: CorrelationMatrix::new(z)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cohort {
        columns,
        subjects,
        excluded,
    })
}

/// Factor representatives with `k` columns (default: one per variable).
pub fn factor_subjects(
    cohort: &Cohort,
    k: Option<usize>,
    cfg: &SolverConfig,
) -> Result<Vec<OrbitPoint>> {
    let k = k.unwrap_or(cohort.columns.len());
    cohort
        .subjects
        .iter()
        .map(|s| {
            factorize(&s.correlation, k, cfg.rank_tol)
                .map(OrbitPoint::new)
                .map_err(|source| PipelineError::Subject {
                    subject: s.id.clone(),
                    source,
                })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub a: String,
    pub b: String,
    pub distance: f64,
    pub converged: bool,
    pub grad_norm: f64,
    pub iterations: usize,
    pub restarts_used: usize,
    pub clamped: bool,
}

#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub ids: Vec<String>,
    pub values: DMatrix<f64>,
    pub pairs: Vec<PairReport>,
}

impl DistanceMatrix {
    pub fn all_converged(&self) -> bool {
        self.pairs.iter().all(|p| p.converged)
    }
}

/// Orbit distances between every pair, computed in parallel and assembled
/// in index order. Pair `(i, j)` uses seed `cfg.seed + pair index`.
pub fn pairwise_distances(
    ids: &[String],
    points: &[OrbitPoint],
    cfg: &SolverConfig,
) -> Result<DistanceMatrix> {
    let n = points.len();
    let index_pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let results = index_pairs
        .par_iter()
        .enumerate()
        .map(|(p, &(i, j))| {
            let pair_cfg = cfg.clone().with_seed(cfg.seed.wrapping_add(p as u64));
            let d = orbit_distance(&points[i], &points[j], &pair_cfg).map_err(|source| {
                PipelineError::Subject {
                    subject: format!("{}/{}", ids[i], ids[j]),
                    source,
                }
            })?;
            let best = match &d.backward {
                Some(b) if b.loss < d.forward.loss => b,
                _ => &d.forward,
            };
            Ok(PairReport {
                a: ids[i].clone(),
                b: ids[j].clone(),
                distance: d.distance,
                converged: best.converged,
                grad_norm: best.grad_norm,
                iterations: best.iterations,
                restarts_used: best.restarts_used,
                clamped: best.clamped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = DMatrix::zeros(n, n);
    for (&(i, j), r) in index_pairs.iter().zip(&results) {
        values[(i, j)] = r.distance;
        values[(j, i)] = r.distance;
    }
    Ok(DistanceMatrix {
        ids: ids.to_vec(),
        values,
        pairs: results,
    })
}

#[derive(Debug, Clone)]
pub struct GroupMean {
    pub group: String,
    pub members: Vec<String>,
    pub mean: CorrelationMatrix,
    pub factor: OrbitPoint,
    pub loss_history: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
}

/// Unit-weight Fréchet mean of each listed group.
pub fn group_means(
    cohort: &Cohort,
    points: &[OrbitPoint],
    groups: &[String],
    cfg: &SolverConfig,
) -> Result<Vec<GroupMean>> {
    groups
        .iter()
        .map(|g| {
            let (members, pts): (Vec<String>, Vec<OrbitPoint>) = cohort
                .subjects
                .iter()
                .zip(points)
                .filter(|(s, _)| &s.group == g)
                .map(|(s, p)| (s.id.clone(), p.clone()))
                .unzip();
            if pts.is_empty() {
                return Err(PipelineError::Manifest(format!(
                    "group {g} has no subjects"
                )));
            }
            let set = WeightedSampleSet::uniform(pts)?;
            let report = frechet_mean(&set, cfg).map_err(|source| match source {
                corrgeom::GeomError::Sample { index, source } => PipelineError::Subject {
                    subject: members[index].clone(),
                    source: *source,
                },
                other => PipelineError::Geometry(other),
            })?;
            Ok(GroupMean {
                group: g.clone(),
                members,
                mean: gram(report.mean.rep()),
                factor: report.mean.clone(),
                loss_history: report.loss_history,
                outer_iterations: report.outer_iterations,
                converged: report.converged,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivingEntry {
    pub i: usize,
    pub j: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferenceReport {
    pub difference: DMatrix<f64>,
    pub thresholded: DMatrix<f64>,
    /// Upper-triangle entries with `|value| > threshold`, largest first.
    pub summary: Vec<SurvivingEntry>,
}

/// `A - B`, a copy with entries of magnitude at most `threshold` zeroed,
/// and the surviving pairs.
pub fn difference_report(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    threshold: f64,
) -> Result<DifferenceReport> {
    if a.shape() != b.shape() {
        return Err(PipelineError::Validation(format!(
            "matrices have shapes {:?} and {:?}",
            a.shape(),
            b.shape()
        )));
    }
    if !(threshold >= 0.0) {
        return Err(PipelineError::Validation(
            "threshold must be non-negative".into(),
        ));
    }
    let difference = a - b;
    let thresholded = difference.map(|v| if v.abs() <= threshold { 0.0 } else { v });
    let mut summary: Vec<SurvivingEntry> = (0..a.nrows())
        .flat_map(|i| (i..a.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| thresholded[(i, j)] != 0.0)
        .map(|(i, j)| SurvivingEntry {
            i,
            j,
            value: thresholded[(i, j)],
        })
        .collect();
    summary.sort_by(|x, y| {
        y.value
            .abs()
            .total_cmp(&x.value.abs())
            .then((x.i, x.j).cmp(&(y.i, y.j)))
    });
    Ok(DifferenceReport {
        difference,
        thresholded,
        summary,
    })
}

/// Groups named in `requested`, or every group of the manifest.
pub fn resolve_groups(manifest: &CohortManifest, requested: &[String]) -> Result<Vec<String>> {
    let known: BTreeSet<String> = manifest.group_labels().into_iter().collect();
    if requested.is_empty() {
        return Ok(known.into_iter().collect());
    }
    for g in requested {
        if !known.contains(g) {
            return Err(PipelineError::Manifest(format!("unknown group {g}")));
        }
    }
    Ok(requested.to_vec())
}
