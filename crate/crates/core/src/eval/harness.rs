//! File-level plumbing shared by the CLI and the end-to-end tests: running
//! strategies into a transcript directory, scoring a directory, and turning a
//! scores file into a report.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::rating::Thresholds;
use super::report::{aggregate, emit_report};
use super::score::{score_transcript, TaskScore};
use super::EvalError;
use crate::corpus::{Corpus, Task};
use crate::pipeline::{Strategy, TranscriptRecord};

pub const SCORES_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoresFile {
    pub schema_version: u32,
    /// One digest per scored transcript, sorted.
    pub generated_from: Vec<String>,
    pub scores: Vec<TaskScore>,
}

pub fn transcript_file_name(task_id: &str, strategy: Strategy) -> String {
    format!("{task_id}.{strategy}.json")
}

pub fn write_transcript(dir: &Path, t: &TranscriptRecord) -> Result<PathBuf, EvalError> {
    fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let path = dir.join(transcript_file_name(&t.task_id, t.strategy));
    let body = serde_json::to_string_pretty(t).expect("transcript serializes") + "\n";
    fs::write(&path, body).map_err(|e| EvalError::io(&path, e))?;
    Ok(path)
}

fn is_transcript_name(name: &str) -> bool {
    Strategy::ALL.iter().any(|s| name.ends_with(&format!(".{s}.json")))
}

/// Every `<task>.<strategy>.json` file in `dir`, in file-name order.
pub fn load_transcripts(dir: &Path) -> Result<Vec<TranscriptRecord>, EvalError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| EvalError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(is_transcript_name))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| EvalError::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| EvalError::Format { path: p.clone(), message: e.to_string() })
        })
        .collect()
}

/// Digest of what scoring reads from a transcript: task, strategy, modeling
/// verdict and final plan. Content the scorer ignores cannot move it.
pub fn transcript_digest(t: &TranscriptRecord) -> String {
    let basis = serde_json::json!({
        "task_id": t.task_id,
        "strategy": t.strategy,
        "modeling_ok": t.modeling_ok(),
        "final_plan": t.final_plan_text(),
    });
    hex::encode(Sha256::digest(basis.to_string().as_bytes()))
}

/// Scores transcripts concurrently against their tasks' reference models.
pub fn score_all(corpus: &Corpus, transcripts: &[TranscriptRecord]) -> Result<ScoresFile, EvalError> {
    let mut tasks: BTreeMap<&str, Task> = BTreeMap::new();
    for t in transcripts {
        if !tasks.contains_key(t.task_id.as_str()) {
            tasks.insert(&t.task_id, corpus.load_task(&t.task_id)?);
        }
    }
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(transcripts.len().max(1));
    let chunk = transcripts.len().div_ceil(workers).max(1);
    let tasks = &tasks;
    let mut scores: Vec<TaskScore> = std::thread::scope(|scope| {
        let handles: Vec<_> = transcripts
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || part.iter().map(|t| score_transcript(&tasks[t.task_id.as_str()], t)).collect::<Vec<_>>())
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("scoring thread panicked")).collect()
    });
    scores.sort_by(|a, b| (a.strategy, &a.task_id).cmp(&(b.strategy, &b.task_id)));
    let mut generated_from: Vec<String> = transcripts.iter().map(transcript_digest).collect();
    generated_from.sort();
    Ok(ScoresFile { schema_version: SCORES_SCHEMA_VERSION, generated_from, scores })
}

pub fn write_scores(path: &Path, scores: &ScoresFile) -> Result<(), EvalError> {
    let body = serde_json::to_string_pretty(scores).expect("scores serialize") + "\n";
    fs::write(path, body).map_err(|e| EvalError::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<ScoresFile, EvalError> {
    let text = fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    let file: ScoresFile = serde_json::from_str(&text)
        .map_err(|e| EvalError::Format { path: path.to_path_buf(), message: e.to_string() })?;
    if file.schema_version != SCORES_SCHEMA_VERSION {
        return Err(EvalError::Format {
            path: path.to_path_buf(),
            message: format!("unsupported schema_version {}", file.schema_version),
        });
    }
    Ok(file)
}

pub fn report_from_scores(scores: &ScoresFile, thresholds: &Thresholds, dest: &Path) -> Result<(), EvalError> {
    let summaries = aggregate(&scores.scores, thresholds)?;
    emit_report(&summaries, &scores.scores, thresholds, &scores.generated_from, dest)
}
