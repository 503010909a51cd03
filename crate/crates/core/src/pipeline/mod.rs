//! Prompt strategies, completion backends and transcripts.

pub mod backend;
pub mod prompt;
pub mod runner;
pub mod transcript;

pub use backend::{
    prompt_digest, Backend, BackendConfig, BackendError, BackendKind, Completion, LiveBackend, RecordingBackend,
    ReplayBackend, ScriptedBackend,
};
pub use prompt::{render_prompt, Phase, PromptError, Strategy};
pub use runner::{react_observations, run_strategy, ReactEnv, REACT_MAX_ITERATIONS};
pub use transcript::{CallRecord, Outcome, TranscriptRecord, SCHEMA_VERSION};
