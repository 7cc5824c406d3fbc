use thiserror::Error;

/// Errors produced anywhere in the toolkit.
///
/// Variants are grouped by the exit code the command-line front end maps
/// them to, see [`Error::exit_code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("no negation normal form: negation cannot cross {construct}")]
    Nnf { construct: &'static str },

    #[error("unknown proposition `{0}`")]
    UnknownProposition(String),

    #[error("line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("invalid model: {0}")]
    Invariant(String),

    #[error("action `{action}` is not applicable in {state}")]
    NotApplicable { action: String, state: String },

    /// A reward formula progressed to false.
    #[error("reward formula `{label}` progressed to false at {state}{}", stage_suffix(*.stage))]
    RewardAbnormality {
        label: String,
        state: String,
        /// 1-based stage index, when known.
        stage: Option<usize>,
    },

    /// The formula was flagged by the bounded normality check.
    #[error("formula is not reward-normal at bound {horizon}")]
    AbnormalFormula { horizon: usize },

    #[error("node budget of {budget} exceeded ({nodes} e-states built)")]
    BudgetExceeded { budget: usize, nodes: usize },

    #[error("capacity exceeded: {what} needs {needed}, limit is {limit}")]
    Capacity { what: &'static str, needed: u128, limit: u128 },

    #[error("i/o error: {0}")]
    Io(String),
}

fn stage_suffix(stage: Option<usize>) -> String {
    match stage {
        Some(i) => format!(" (stage {i})"),
        None => String::new(),
    }
}

impl Error {
    /// Process exit code for this error class.
    ///
    /// 1 input/syntax, 2 static abnormality, 3 runtime abnormality,
    /// 4 budget, 5 capacity.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::Nnf { .. }
            | Error::UnknownProposition(_)
            | Error::Format { .. }
            | Error::Invariant(_)
            | Error::NotApplicable { .. }
            | Error::Io(_) => 1,
            Error::AbnormalFormula { .. } => 2,
            Error::RewardAbnormality { .. } => 3,
            Error::BudgetExceeded { .. } => 4,
            Error::Capacity { .. } => 5,
        }
    }

    pub(crate) fn with_stage(self, stage: usize) -> Self {
        match self {
            Error::RewardAbnormality { label, state, .. } => Error::RewardAbnormality {
                label,
                state,
                stage: Some(stage),
            },
            other => other,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
