use std::fmt;
use std::path::PathBuf;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit-code contract: user-facing problems
/// (arguments, files, configs, training data) exit with code 1, violated
/// internal invariants with code 2.
#[derive(Debug)]
pub enum Error {
    /// Tensor/shape structural violation (offending dims in the message).
    Shape(String),
    /// Invalid argument to an operation.
    Argument(String),
    /// Malformed or unsupported file content; names the offending field.
    Format { path: Option<PathBuf>, message: String },
    /// Corpus/data problem, names the item.
    Data(String),
    /// Config parse or validation failure.
    Config(String),
    /// Training aborted (NaN loss/gradient etc.).
    Training(String),
    /// Checkpoint incompatible with the current model/config.
    Incompatible(String),
    /// I/O failure with path context.
    Io { path: PathBuf, source: std::io::Error },
    /// Broken internal invariant; a bug, not a user error.
    Internal(String),
}

impl Error {
    /// Exit code for the CLI: 1 for user/config errors, 2 for internal bugs.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_) | Error::Internal(_) => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape(msg) => write!(f, "shape error: {msg}"),
            Error::Argument(msg) => write!(f, "invalid argument: {msg}"),
            Error::Format { path: Some(p), message } => {
                write!(f, "format error in {}: {message}", p.display())
            }
            Error::Format { path: None, message } => write!(f, "format error: {message}"),
            Error::Data(msg) => write!(f, "data error: {msg}"),
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Training(msg) => write!(f, "training error: {msg}"),
            Error::Incompatible(msg) => write!(f, "incompatible checkpoint: {msg}"),
            Error::Io { path, source } => write!(f, "io error on {}: {source}", path.display()),
            Error::Internal(msg) => write!(f, "internal error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
