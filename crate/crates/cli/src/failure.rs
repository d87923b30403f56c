use std::fmt;
use std::path::Path;

/// Command failure, mapped onto the process exit status.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration or input files.
    Invalid(String),
    /// Output already present and `--overwrite` not given.
    Clobber(String),
    /// A numerical routine failed or training diverged.
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Invalid(_) => 2,
            Failure::Clobber(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::Invalid(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Invalid(m) | Failure::Numerical(m) => f.write_str(m),
            Failure::Clobber(p) => write!(f, "{p} already exists; pass --overwrite to replace it"),
        }
    }
}

impl From<graphclean::Error> for Failure {
    fn from(e: graphclean::Error) -> Self {
        if e.is_numerical() {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Invalid(e.to_string())
        }
    }
}
