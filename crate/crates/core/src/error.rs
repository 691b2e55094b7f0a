use std::path::PathBuf;

use crate::llm::AgentRole;
use crate::score::Direction;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot compare a {0:?} score with a {1:?} score")]
    DirectionMismatch(Direction, Direction),
    #[error("solution {0} has no score")]
    UnscoredSolution(String),
    #[error("score value {0} is not finite")]
    NonFiniteScore(String),
    #[error("no `Final Validation Performance:` marker line in output")]
    MissingScore,

    #[error("code block not found in script")]
    BlockNotFound,
    #[error("code block occurs {0} times in script")]
    AmbiguousBlock(usize),
    #[error("code block is empty")]
    EmptyBlock,
    #[error("extractor could not produce a usable block: {0}")]
    UnusableBlock(String),
    #[error("agent returned an empty script")]
    EmptyScript,

    #[error("template for {role} has no binding for `{name}`")]
    MissingBinding { role: AgentRole, name: String },
    #[error("no prompt template for role {0}")]
    MissingTemplate(AgentRole),
    #[error("provider unavailable for {role} after {attempts} attempts: {reason}")]
    ProviderUnavailable {
        role: AgentRole,
        attempts: u32,
        reason: String,
    },
    #[error("provider returned empty responses for {role} after {attempts} attempts")]
    EmptyResponse { role: AgentRole, attempts: u32 },
    #[error("malformed structured output: {0}")]
    MalformedStructuredOutput(String),
    #[error("expected {expected} model cards, got {actual}")]
    WrongCardCount { expected: usize, actual: usize },

    #[error("failed to spawn interpreter: {0}")]
    SpawnFailure(String),
    #[error("time budget exhausted")]
    BudgetExhausted,

    #[error("every candidate solution failed")]
    AllCandidatesFailed,
    #[error("submission file `{0}` was not produced")]
    SubmissionMissing(String),

    #[error("corrupt journal {path}: {reason}")]
    CorruptJournal { path: PathBuf, reason: String },
    #[error("run halted at checkpoint `{0}`")]
    Halted(String),

    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> Error {
        let context = context.into();
        move |source| Error::Io { context, source }
    }

    /// Errors that abandon the whole run rather than a single attempt.
    pub fn is_fatal(&self) -> bool {
        matches!(
            self,
            Error::ProviderUnavailable { .. }
                | Error::SpawnFailure(_)
                | Error::CorruptJournal { .. }
                | Error::Halted(_)
                | Error::Io { .. }
                | Error::Config(_)
        )
    }
}
