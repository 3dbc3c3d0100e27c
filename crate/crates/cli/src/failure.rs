use std::fmt;
use std::path::Path;

use ecgboost::Error;

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    pub fn pipeline(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_PIPELINE,
            message: message.into(),
        }
    }

    /// Prefixes the message with a context such as a file name.
    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Parameter(_) => Self::usage(message),
            Error::Pipeline(_) | Error::SkippedLabel(_) | Error::InsufficientBeats { .. } => {
                Self::pipeline(message)
            }
            _ => Self::data(message),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Attaches the path to any core error.
pub fn at<T>(path: &Path, r: ecgboost::Result<T>) -> CliResult<T> {
    r.map_err(|e| Failure::from(e).context(path.display()))
}

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn require_file(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{}: no such file", path.display())))
    }
}

pub fn require_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(Failure::usage(format!("{}: no such directory", path.display())))
    }
}

/// Output file whose parent directory must already exist.
pub fn require_writable_parent(path: &Path) -> CliResult<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => Err(Failure::usage(format!(
            "{}: parent directory does not exist",
            path.display()
        ))),
        _ => Ok(()),
    }
}

/// Output directory, created if missing; its parent must exist.
pub fn prepare_out_dir(path: &Path) -> CliResult<()> {
    if path.is_dir() {
        return Ok(());
    }
    require_writable_parent(path)?;
    std::fs::create_dir(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}
