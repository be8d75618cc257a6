use std::fmt;
use std::path::{Path, PathBuf};

/// Every failure the command layer can report. `Validation` covers bad
/// configuration and malformed input files; the rest are runtime failures.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}", Lines(.0))]
    Validation(Vec<String>),
    #[error("{path}{}: {message}", line.map(|l| format!(":{l}")).unwrap_or_default())]
    Format {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Runtime(String),
}

struct Lines<'a>(&'a [String]);

impl fmt::Display for Lines<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, line) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{line}")?;
        }
        Ok(())
    }
}

impl Error {
    /// 1 for validation and input-format problems, 2 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Format { .. } => 1,
            Error::Io { .. } | Error::Runtime(_) => 2,
        }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(vec![message.into()])
    }

    pub(crate) fn format(path: &Path, line: Option<usize>, message: impl fmt::Display) -> Self {
        Error::Format {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn runtime(message: impl fmt::Display) -> Self {
        Error::Runtime(message.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
