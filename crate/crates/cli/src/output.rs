use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::failure::Failure;

/// An output directory that refuses to replace existing files unless told to.
pub struct OutDir {
    root: PathBuf,
    overwrite: bool,
}

impl OutDir {
    pub fn new(root: &Path, overwrite: bool) -> Self {
        OutDir {
            root: root.to_path_buf(),
            overwrite,
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Checks every planned file up front so nothing is half-written on refusal.
    pub fn claim(&self, names: &[&str]) -> Result<(), Failure> {
        if !self.overwrite {
            if let Some(p) = names.iter().map(|n| self.path(n)).find(|p| p.exists()) {
                return Err(Failure::Clobber(p.display().to_string()));
            }
        }
        fs::create_dir_all(&self.root).map_err(|e| Failure::io(&self.root, e))
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let p = self.path(name);
        fs::write(&p, contents).map_err(|e| Failure::io(&p, e))
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::Invalid(format!("{name}: {e}")))?;
        s.push('\n');
        self.write(name, &s)
    }
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))
}
