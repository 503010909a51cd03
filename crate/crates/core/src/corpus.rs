//! Task corpus: one directory per task holding `task.txt`, `model.mdl`,
//! `reference.plan` and `mutants/NN.<Class>.plan`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{check_model, state_space_size};
use crate::model::ProblemModel;
use crate::parser::{parse_model, parse_plan, Plan};
use crate::validator::{validate_plan, Mode, ViolationClass};

/// Upper bound on a corpus model's grounded state space.
pub const MAX_STATE_SPACE: u64 = 100_000;

/// Root of the corpus shipped with this crate.
pub fn default_root() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    MedicationScheduling,
    TemporalRouting,
    ResourceAllocation,
    LogicPuzzle,
    ProceduralSynthesis,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::MedicationScheduling,
        Family::TemporalRouting,
        Family::ResourceAllocation,
        Family::LogicPuzzle,
        Family::ProceduralSynthesis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::MedicationScheduling => "medication-scheduling",
            Family::TemporalRouting => "temporal-routing",
            Family::ResourceAllocation => "resource-allocation",
            Family::LogicPuzzle => "logic-puzzle",
            Family::ProceduralSynthesis => "procedural-synthesis",
        }
    }

    /// Task ids carry their family as a prefix: `med`, `route`, `alloc`,
    /// `logic`, `synth`.
    pub fn from_task_id(id: &str) -> Option<Family> {
        let prefix = id.trim_end_matches(|c: char| c.is_ascii_digit());
        match prefix {
            "med" => Some(Family::MedicationScheduling),
            "route" => Some(Family::TemporalRouting),
            "alloc" => Some(Family::ResourceAllocation),
            "logic" => Some(Family::LogicPuzzle),
            "synth" => Some(Family::ProceduralSynthesis),
            _ => None,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mutant {
    /// File stem, e.g. `03.PreconditionFailure`.
    pub name: String,
    pub plan: Plan,
    pub expected: ViolationClass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub family: Family,
    pub nl_description: String,
    pub reference_model_text: String,
    pub reference_model: ProblemModel,
    pub reference_plan: Plan,
    pub mutants: Vec<Mutant>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("unknown task id `{0}`")]
    UnknownId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("task {task}: {message}")]
    Invalid { task: String, message: String },
}

#[derive(Debug, Clone)]
pub struct Corpus {
    root: PathBuf,
}

impl Default for Corpus {
    fn default() -> Self {
        Corpus::new(default_root())
    }
}

fn read(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

impl Corpus {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Corpus { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Task ids in family order, then by id.
    pub fn list_tasks(&self) -> Result<Vec<String>, CorpusError> {
        let entries = fs::read_dir(&self.root).map_err(|source| CorpusError::Io { path: self.root.clone(), source })?;
        let mut ids = Vec::new();
        for e in entries {
            let e = e.map_err(|source| CorpusError::Io { path: self.root.clone(), source })?;
            if !e.path().join("model.mdl").is_file() {
                continue;
            }
            let id = e.file_name().to_string_lossy().into_owned();
            if let Some(family) = Family::from_task_id(&id) {
                ids.push((family, id));
            }
        }
        ids.sort();
        Ok(ids.into_iter().map(|(_, id)| id).collect())
    }

    /// Loads a task and verifies its invariants: a clean model of bounded
    /// size, a reference plan that validates, and mutants that fail first
    /// with their expected class.
    pub fn load_task(&self, id: &str) -> Result<Task, CorpusError> {
        let family = Family::from_task_id(id).ok_or_else(|| CorpusError::UnknownId(id.to_string()))?;
        let dir = self.root.join(id);
        if !dir.join("model.mdl").is_file() {
            return Err(CorpusError::UnknownId(id.to_string()));
        }
        let invalid = |message: String| CorpusError::Invalid { task: id.to_string(), message };

        let nl_description = read(&dir.join("task.txt"))?;
        let reference_model_text = read(&dir.join("model.mdl"))?;
        let reference_model = parse_model(&reference_model_text).map_err(|issues| {
            invalid(format!("model.mdl does not parse: {}", issues.first().map(|i| i.to_string()).unwrap_or_default()))
        })?;
        if let Some(issue) = check_model(&reference_model).first() {
            return Err(invalid(format!("model.mdl: {issue}")));
        }
        let size = state_space_size(&reference_model);
        if size.saturated || size.value > MAX_STATE_SPACE {
            return Err(invalid(format!("state space {} exceeds {MAX_STATE_SPACE}", size.value)));
        }
        let reference_plan = parse_plan(&read(&dir.join("reference.plan"))?);
        let report = validate_plan(&reference_model, &reference_plan, Mode::HaltOnFirst);
        if !report.is_clean() {
            return Err(invalid(format!("reference plan fails: {:?}", report.first_violation())));
        }

        let mut mutants = Vec::new();
        let mdir = dir.join("mutants");
        if mdir.is_dir() {
            let mut paths: Vec<PathBuf> = fs::read_dir(&mdir)
                .map_err(|source| CorpusError::Io { path: mdir.clone(), source })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "plan"))
                .collect();
            paths.sort();
            for p in paths {
                let name = p.file_stem().expect("has stem").to_string_lossy().into_owned();
                let class = name
                    .split_once('.')
                    .and_then(|(_, c)| ViolationClass::from_str(c).ok())
                    .ok_or_else(|| invalid(format!("mutant `{name}` does not name a violation class")))?;
                mutants.push(Mutant { name, plan: parse_plan(&read(&p)?), expected: class });
            }
        }

        Ok(Task { id: id.to_string(), family, nl_description, reference_model_text, reference_model, reference_plan, mutants })
    }

    pub fn load_all(&self) -> Result<Vec<Task>, CorpusError> {
        self.list_tasks()?.iter().map(|id| self.load_task(id)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_prefixes() {
        assert_eq!(Family::from_task_id("med1"), Some(Family::MedicationScheduling));
        assert_eq!(Family::from_task_id("synth12"), Some(Family::ProceduralSynthesis));
        assert_eq!(Family::from_task_id("nope"), None);
    }

    #[test]
    fn unknown_id() {
        assert!(matches!(Corpus::default().load_task("nope"), Err(CorpusError::UnknownId(_))));
        assert!(matches!(Corpus::default().load_task("med99"), Err(CorpusError::UnknownId(_))));
    }
}
