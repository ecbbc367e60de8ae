use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// The instance violates one of its structural invariants. `path` names the offending field.
    #[error("invalid instance at `{path}`: {message}")]
    InvalidInstance { path: String, message: String },

    #[error("malformed JSON in {what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown line id {0}")]
    UnknownLine(u32),

    #[error("unknown control point id {0}")]
    UnknownControlPoint(u32),

    /// The combined timetable has no entries, so there is nothing to decide.
    #[error("instance has no departures")]
    EmptyTimetable,

    /// A caller broke an operation's precondition (for example acted on a masked slot).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("all action slots are masked")]
    NoValidAction,

    #[error("numerical failure: {0}")]
    NonFinite(String),

    #[error("model file rejected: {0}")]
    ModelMismatch(String),

    #[error("instance too large for exhaustive search: {0}")]
    TooLarge(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schedule does not match instance: {0}")]
    ScheduleMismatch(String),
}

impl Error {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::InvalidInstance {
            path: path.into(),
            message: message.into(),
        }
    }
}
