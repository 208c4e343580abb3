//! Content-addressed run directories.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};

/// Hex digest of the resolved config; the seed is part of the config.
pub fn run_key(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.to_toml().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// A directory owned by one run. Created with the resolved config inside.
#[derive(Debug, Clone)]
pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// `<out>/<command>-<key>`. An existing non-empty directory is an error
    /// unless `force` is set, in which case its files are replaced.
    pub fn create(cfg: &ExperimentConfig, force: bool) -> LabResult<Self> {
        let path = Path::new(&cfg.out).join(format!("{}-{}", cfg.command.as_str(), run_key(cfg)));
        let occupied = fs::read_dir(&path)
            .map(|mut d| d.next().is_some())
            .unwrap_or(false);
        if occupied {
            if !force {
                return Err(LabError::Config(format!(
                    "{} already exists; pass --force to overwrite",
                    path.display()
                )));
            }
            fs::remove_dir_all(&path).map_err(|e| LabError::io(&path, e))?;
        }
        fs::create_dir_all(&path).map_err(|e| LabError::io(&path, e))?;
        let dir = RunDir { path };
        dir.write("config.toml", &cfg.to_toml())?;
        Ok(dir)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, name: &str, contents: &str) -> LabResult<PathBuf> {
        let p = self.path.join(name);
        fs::write(&p, contents).map_err(|e| LabError::io(&p, e))?;
        Ok(p)
    }
}
