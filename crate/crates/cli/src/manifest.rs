use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;

/// Everything needed to replay a command.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub artifacts: Vec<PathBuf>,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_secs: Option<f64>,
    #[serde(skip)]
    started: Option<Instant>,
}

/// `git describe` of the working tree when available, else the crate version.
pub fn version_string() -> String {
    let pkg = format!("v{}", env!("CARGO_PKG_VERSION"));
    Command::new("git")
        .args(["describe", "--tags", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| format!("{pkg}-{}", s.trim()))
        .unwrap_or(pkg)
}

impl RunManifest {
    pub fn new(command: &[String], config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_vec(),
            config,
            seed,
            artifacts: Vec::new(),
            version: version_string(),
            started_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            wall_clock_secs: None,
            started: Some(Instant::now()),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, serde_json::to_string_pretty(self)?)
            .with_context(|| format!("writing {}", path.display()))
    }

    /// Records the elapsed time and rewrites the manifest.
    pub fn finish(&mut self, path: &Path) -> Result<()> {
        self.wall_clock_secs = self.started.map(|s| s.elapsed().as_secs_f64());
        self.write(path)
    }
}
