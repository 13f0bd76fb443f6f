//! Cohort manifests: which subject lives in which file and group.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PipelineError, Result};
use crate::table::DropPolicy;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectEntry {
    pub subject_id: String,
    pub path: PathBuf,
    pub group: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortManifest {
    pub subjects: Vec<SubjectEntry>,
    /// Factor rank; defaults to the number of retained columns.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub drop_policy: DropPolicy,
    /// Allowed group labels; inferred from the subjects when absent.
    #[serde(default)]
    pub groups: Option<Vec<String>>,
}

impl CohortManifest {
    /// Checks ids are unique, groups are declared and `k ≥ 2`.
    pub fn check(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(PipelineError::Manifest("no subjects listed".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.subjects {
            if !seen.insert(&s.subject_id) {
                return Err(PipelineError::Manifest(format!(
                    "duplicate subject id {}",
                    s.subject_id
                )));
            }
        }
        if let Some(groups) = &self.groups {
            if let Some(s) = self.subjects.iter().find(|s| !groups.contains(&s.group)) {
                return Err(PipelineError::Manifest(format!(
                    "subject {} has undeclared group {}",
                    s.subject_id, s.group
                )));
            }
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(PipelineError::Manifest(format!(
                    "k must be at least 2, got {k}"
                )));
            }
        }
        Ok(())
    }

    /// Declared groups, or the distinct subject groups in sorted order.
    pub fn group_labels(&self) -> Vec<String> {
        match &self.groups {
            Some(g) => g.clone(),
            None => self
                .subjects
                .iter()
                .map(|s| s.group.clone())
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        }
    }
}

/// Loads a JSON manifest (`.json`) or a delimited file with columns
/// `subject_id,path,group`. Relative paths resolve against the manifest's
/// directory.
pub fn load_manifest(path: &Path) -> Result<CohortManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let is_json = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let mut manifest = if is_json {
        serde_json::from_str::<CohortManifest>(&text).map_err(|e| PipelineError::Parse {
            path: path.to_path_buf(),
            line: e.line() as u64,
            column: e.column().to_string(),
            message: e.to_string(),
        })?
    } else {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut subjects = Vec::new();
        for row in reader.deserialize::<SubjectEntry>() {
            let row = row.map_err(|e| PipelineError::Parse {
                path: path.to_path_buf(),
                line: e.position().map_or(0, |p| p.line()),
                column: String::new(),
                message: e.to_string(),
            })?;
            subjects.push(row);
        }
        CohortManifest {
            subjects,
            k: None,
            drop_policy: DropPolicy::default(),
            groups: None,
        }
    };
    let base = path.parent().unwrap_or(Path::new(""));
    for s in &mut manifest.subjects {
        if s.path.is_relative() {
            s.path = base.join(&s.path);
        }
    }
    manifest.check()?;
    Ok(manifest)
}
