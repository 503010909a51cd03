//! Scoring, qualitative mapping, aggregation and report emission.

pub mod harness;
pub mod rating;
pub mod report;
pub mod score;

use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::CorpusError;

pub use harness::{
    load_transcripts, read_scores, report_from_scores, score_all, transcript_digest, transcript_file_name,
    write_scores, write_transcript, ScoresFile,
};
pub use rating::{
    map_to_qualitative, qualitative_to_numeric, Criterion, Frequency, Level, QualitativeRating, Thresholds,
};
pub use report::{aggregate, emit_report, render_plot_csv, render_table, CriterionValues, Report, StrategySummary};
pub use score::{score_plan, score_transcript, TaskScore};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no scores to aggregate")]
    Empty,
    #[error("strategies cover different task sets: {0}")]
    MismatchedTasks(String),
    #[error("unknown criterion `{0}`")]
    UnknownCriterion(String),
    #[error("threshold config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl EvalError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EvalError::Io { path: path.into(), source }
    }
}
