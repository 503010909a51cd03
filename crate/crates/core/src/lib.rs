//! Model-first planning toolkit: a small model definition language, a plan
//! validator that simulates state transitions, a brute-force oracle planner,
//! prompt strategies over pluggable LLM backends, and an evaluation harness.

pub mod checker;
pub mod corpus;
pub mod eval;
pub mod model;
pub mod oracle;
pub mod parser;
pub mod pipeline;
pub mod validator;

pub use checker::{check_model, state_space_size, IssueKind, SemanticIssue, StateSpaceSize};
pub use corpus::{Corpus, CorpusError, Family, Mutant, Task};
pub use eval::{aggregate, score_transcript, Criterion, QualitativeRating, StrategySummary, TaskScore, Thresholds};
pub use model::{
    evaluate_condition, ground_action, initial_state, ActionSchema, Binding, Condition, Domain, EntitySort,
    GroundAction, GroundVar, ModelError, ProblemModel, State, Value, VariableDecl,
};
pub use oracle::{enumerate_valid_plans, execute_reference, solve, CancelToken, OracleError, SearchConfig, SearchStats, Verdict};
pub use parser::{
    extract_blocks, parse_model, parse_plan, serialize_model, ExtractedArtifacts, ParseIssue, ParseIssueKind, Plan,
    PlanStep,
};
pub use pipeline::{run_strategy, Backend, BackendConfig, BackendError, Strategy, TranscriptRecord};
pub use validator::{apply_step, trace_render, validate_plan, Mode, ValidationReport, Violation, ViolationClass};
