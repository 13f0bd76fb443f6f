//! Command-line front end.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use corrgeom::quotient::{geodesic_rank_profile, GeodesicSegment};
use corrgeom::{validate, OrbitPoint, SolverConfig, UnitRowMatrix, ValidationTolerances};
use serde::Serialize;

use crate::error::{PipelineError, Result};
use crate::manifest::load_manifest;
use crate::matrix_io::{format_value, matrix_to_csv, read_matrix, write_text};
use crate::pipeline::{
    difference_report, factor_subjects, group_means, load_cohort, pairwise_distances,
    resolve_groups, Exclusion, PairReport,
};

#[derive(Debug, Parser)]
#[command(
    name = "corrgeom",
    version,
    about = "Geometry of correlation matrices from time-series data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check that a matrix CSV is a valid correlation matrix.
    Validate { file: PathBuf },
    /// Write the correlation matrix of every subject in a manifest.
    Corr {
        manifest: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Pairwise orbit distances between all subjects.
    Dist {
        manifest: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fréchet mean correlation matrix of each group.
    Mean {
        manifest: PathBuf,
        /// Group to average; repeat for several. Defaults to all groups.
        #[arg(long)]
        group: Vec<String>,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Difference of two matrices with small entries thresholded away.
    Diff {
        mean_a: PathBuf,
        mean_b: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        threshold: f64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Rank along the geodesic between two factor matrices.
    Geodesic {
        x: PathBuf,
        y: PathBuf,
        #[arg(long, default_value_t = 17)]
        samples: usize,
        #[command(flatten)]
        solver: SolverArgs,
        /// Write the profile here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Factor rank; defaults to the manifest value, then to the column count.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub restarts: usize,
    /// Gradient-norm stopping tolerance.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Leave wall-clock time out of the JSON report.
    #[arg(long)]
    pub no_timing: bool,
}

impl SolverArgs {
    pub fn config(&self) -> Result<SolverConfig> {
        if self.restarts == 0 {
            return Err(PipelineError::Validation(
                "--restarts must be at least 1".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(PipelineError::Validation("--tol must be positive".into()));
        }
        let mut cfg = SolverConfig::default()
            .with_restarts(self.restarts)
            .with_seed(self.seed);
        cfg.grad_tol = self.tol;
        Ok(cfg)
    }
}

/// Exit status of a completed command: 0, or 3 when some solver run did
/// not converge.
pub type Status = i32;

pub fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Validate { file } => cmd_validate(&file),
        Command::Corr { manifest, out } => cmd_corr(&manifest, &out),
        Command::Dist {
            manifest,
            solver,
            out,
        } => cmd_dist(&manifest, &solver, &out),
        Command::Mean {
            manifest,
            group,
            solver,
            out,
        } => cmd_mean(&manifest, &group, &solver, &out),
        Command::Diff {
            mean_a,
            mean_b,
            threshold,
            out,
        } => cmd_diff(&mean_a, &mean_b, threshold, &out),
        Command::Geodesic {
            x,
            y,
            samples,
            solver,
            out,
        } => cmd_geodesic(&x, &y, samples, &solver, out.as_deref()),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| PipelineError::Output {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    write_text(path, &(text + "\n"))
}

fn cmd_validate(file: &Path) -> Result<Status> {
    let m = read_matrix(file)?;
    match validate(&m.values, &ValidationTolerances::default()) {
        Ok(z) => {
            println!(
                "valid correlation matrix: {}x{}, rank {}",
                z.dim(),
                z.dim(),
                z.detected_rank()
            );
            Ok(0)
        }
        Err(violations) => Err(PipelineError::Validation(
            violations
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join("; "),
        )),
    }
}

#[derive(Serialize)]
struct CorrReport<'a> {
    columns: &'a [String],
    subjects: Vec<CorrSubject>,
    excluded: &'a [Exclusion],
}

#[derive(Serialize)]
struct CorrSubject {
    subject_id: String,
    group: String,
    rank: usize,
    file: String,
}

fn cmd_corr(manifest: &Path, out: &Path) -> Result<Status> {
    let manifest = load_manifest(manifest)?;
    let cohort = load_cohort(&manifest)?;
    let mut subjects = Vec::new();
    for s in &cohort.subjects {
        let file = format!("corr_{}.csv", s.id);
        write_text(
            &out.join(&file),
            &matrix_to_csv(&cohort.columns, s.correlation.entries()),
        )?;
        subjects.push(CorrSubject {
            subject_id: s.id.clone(),
            group: s.group.clone(),
            rank: s.correlation.detected_rank(),
            file,
        });
    }
    write_json(
        &out.join("corr_report.json"),
        &CorrReport {
            columns: &cohort.columns,
            subjects,
            excluded: &cohort.excluded,
        },
    )?;
    println!(
        "{} subjects, {} columns retained, {} excluded",
        cohort.subjects.len(),
        cohort.columns.len(),
        cohort.excluded.len()
    );
    Ok(0)
}

#[derive(Serialize)]
struct DistReport<'a> {
    config: &'a SolverConfig,
    k: usize,
    columns: &'a [String],
    excluded: &'a [Exclusion],
    pairs: &'a [PairReport],
    all_converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

fn cmd_dist(manifest_path: &Path, solver: &SolverArgs, out: &Path) -> Result<Status> {
    let start = Instant::now();
    let cfg = solver.config()?;
    let manifest = load_manifest(manifest_path)?;
    let cohort = load_cohort(&manifest)?;
    let k = solver.k.or(manifest.k).unwrap_or(cohort.columns.len());
    let points = factor_subjects(&cohort, Some(k), &cfg)?;
    let ids = cohort.ids();
    let d = pairwise_distances(&ids, &points, &cfg)?;
    write_text(&out.join("distances.csv"), &matrix_to_csv(&ids, &d.values))?;
    let all_converged = d.all_converged();
    write_json(
        &out.join("dist_report.json"),
        &DistReport {
            config: &cfg,
            k,
            columns: &cohort.columns,
            excluded: &cohort.excluded,
            pairs: &d.pairs,
            all_converged,
            wall_time_seconds: (!solver.no_timing).then(|| start.elapsed().as_secs_f64()),
        },
    )?;
    println!("{} subjects, {} pairs, k = {k}", ids.len(), d.pairs.len());
    Ok(if all_converged { 0 } else { 3 })
}

#[derive(Serialize)]
struct MeanEntry {
    group: String,
    members: Vec<String>,
    file: String,
    loss_history: Vec<f64>,
    outer_iterations: usize,
    converged: bool,
}

#[derive(Serialize)]
struct MeanRunReport<'a> {
    config: &'a SolverConfig,
    k: usize,
    columns: &'a [String],
    excluded: &'a [Exclusion],
    groups: Vec<MeanEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_seconds: Option<f64>,
}

fn cmd_mean(
    manifest_path: &Path,
    groups: &[String],
    solver: &SolverArgs,
    out: &Path,
) -> Result<Status> {
    let start = Instant::now();
    let cfg = solver.config()?;
    let manifest = load_manifest(manifest_path)?;
    let groups = resolve_groups(&manifest, groups)?;
    let cohort = load_cohort(&manifest)?;
    let k = solver.k.or(manifest.k).unwrap_or(cohort.columns.len());
    let points = factor_subjects(&cohort, Some(k), &cfg)?;
    let means = group_means(&cohort, &points, &groups, &cfg)?;
    let mut entries = Vec::new();
    for m in means {
        let file = format!("mean_{}.csv", m.group);
        write_text(
            &out.join(&file),
            &matrix_to_csv(&cohort.columns, m.mean.entries()),
        )?;
        entries.push(MeanEntry {
            group: m.group,
            members: m.members,
            file,
            loss_history: m.loss_history,
            outer_iterations: m.outer_iterations,
            converged: m.converged,
        });
    }
    let all_converged = entries.iter().all(|e| e.converged);
    write_json(
        &out.join("mean_report.json"),
        &MeanRunReport {
            config: &cfg,
            k,
            columns: &cohort.columns,
            excluded: &cohort.excluded,
            groups: entries,
            wall_time_seconds: (!solver.no_timing).then(|| start.elapsed().as_secs_f64()),
        },
    )?;
    Ok(if all_converged { 0 } else { 3 })
}

fn cmd_diff(a: &Path, b: &Path, threshold: f64, out: &Path) -> Result<Status> {
    let ma = read_matrix(a)?;
    let mb = read_matrix(b)?;
    let r = difference_report(&ma.values, &mb.values, threshold)?;
    let labels = ma
        .labels
        .unwrap_or_else(|| (0..ma.values.nrows()).map(|i| i.to_string()).collect());
    write_text(
        &out.join("difference.csv"),
        &matrix_to_csv(&labels, &r.difference),
    )?;
    write_text(
        &out.join("thresholded.csv"),
        &matrix_to_csv(&labels, &r.thresholded),
    )?;
    let mut summary = String::from("row,col,value\n");
    for e in &r.summary {
        let name = |i: usize| labels.get(i).cloned().unwrap_or_else(|| i.to_string());
        summary.push_str(&format!(
            "{},{},{}\n",
            name(e.i),
            name(e.j),
            format_value(e.value)
        ));
    }
    write_text(&out.join("difference_summary.csv"), &summary)?;
    println!("{} entries exceed {threshold}", r.summary.len());
    Ok(0)
}

fn read_factor(path: &Path) -> Result<OrbitPoint> {
    let m = read_matrix(path)?;
    UnitRowMatrix::new(m.values)
        .map(OrbitPoint::new)
        .map_err(|e| PipelineError::Validation(format!("{}: {e}", path.display())))
}

fn cmd_geodesic(
    x: &Path,
    y: &Path,
    samples: usize,
    solver: &SolverArgs,
    out: Option<&Path>,
) -> Result<Status> {
    let cfg = solver.config()?;
    let px = read_factor(x)?;
    let py = read_factor(y)?;
    let seg = GeodesicSegment::between(&px, &py, &cfg)?;
    let profile = geodesic_rank_profile(&seg, samples, cfg.rank_tol)?;
    let mut text = String::from("t,rank,position\n");
    text.push_str(&format!(
        "{},{},start\n",
        format_value(profile.start.0),
        profile.start.1
    ));
    for (t, r) in &profile.interior {
        text.push_str(&format!("{},{r},interior\n", format_value(*t)));
    }
    text.push_str(&format!(
        "{},{},end\n",
        format_value(profile.end.0),
        profile.end.1
    ));
    match out {
        Some(p) => write_text(p, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "distance {}, interior rank {}",
        format_value(seg.velocity.norm()),
        profile
            .interior_rank()
            .map_or_else(|| "varies".to_string(), |r| r.to_string())
    );
    Ok(0)
}
