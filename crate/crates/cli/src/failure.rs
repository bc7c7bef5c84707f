use std::fmt;

use surfreg::Error;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_VALIDATION: u8 = 3;
pub const EXIT_REGISTRATION: u8 = 4;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }

    /// Wraps a library error raised while reading `path`.
    pub fn reading(path: &std::path::Path, e: Error) -> Self {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match (&e, e.root()) {
            (Error::Stage { .. }, _) => EXIT_REGISTRATION,
            (_, Error::Parse { .. } | Error::UnsupportedFormat(_) | Error::Io(_)) => EXIT_INPUT,
            (
                _,
                Error::CoarseFailed { .. }
                | Error::NoCorrespondences
                | Error::NoInliers
                | Error::TooFewCorrespondences { .. }
                | Error::DegenerateEdges,
            ) => EXIT_REGISTRATION,
            _ => EXIT_VALIDATION,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, Failure>;
