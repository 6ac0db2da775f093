use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;

pub mod audio;
pub mod prune;
pub mod stats;
pub mod sweep;
pub mod train;

/// Usage errors exit with 2, everything else with 1.
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<prunekit::Error> for CliError {
    fn from(e: prunekit::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_sparsity(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("sparsity must lie in [0, 1), got {v}"))
    }
}

/// Flag, then the environment, then `prunekit-out`.
pub fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(crate::OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("prunekit-out"))
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Writes to `path`, or to stdout when `None`.
pub fn emit(path: Option<&Path>, body: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                create_dir(parent)?;
            }
            fs::write(p, body).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }
}
