use thiserror::Error;

/// Errors raised by the trust engine and its supporting modules.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A model, document or observation violates one of its invariants.
    #[error("validation error at {path}: {message}")]
    Validation { path: String, message: String },

    /// An atom was referenced without being declared in the model's fact set.
    #[error("model '{model}': atom '{atom}' referenced by {context} is not a declared fact")]
    UnknownAtom {
        model: String,
        atom: String,
        context: String,
    },

    /// The planner expanded more states than its configured cap.
    #[error("model '{model}': search exhausted the state cap of {cap} states")]
    ResourceExhausted { model: String, cap: usize },

    #[error("cannot derive a contract: {0}")]
    CannotDeriveContract(String),

    /// A value fell outside the domain of a function (e.g. a probability outside [0, 1]).
    #[error("domain error: {0}")]
    Domain(String),

    /// Every candidate model assigns zero likelihood to an observation.
    #[error("observation is inconsistent with every candidate model")]
    Contradiction,

    #[error("degenerate test: {0}")]
    DegenerateTest(String),

    #[error("study aborted at subject {subject_id}, message {message_index}: {source}")]
    StudyAborted {
        subject_id: u32,
        message_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn validation(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
