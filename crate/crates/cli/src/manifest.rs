//! Run manifests and plot emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use lqg_core::Result;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::experiments::{worst, Check, Status};
use crate::plots::PlotSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedStatus {
    pub seed: u64,
    pub status: Status,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub config: RunConfig,
    pub code_version: String,
    pub seeds: Vec<SeedStatus>,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    pub plots: Vec<PlotSpec>,
}

impl RunManifest {
    pub fn new(config: &RunConfig) -> Self {
        RunManifest {
            run_id: config.run_id(),
            config: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds: Vec::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            checks: Vec::new(),
            plots: Vec::new(),
        }
    }

    pub fn status(&self) -> Status {
        worst(&self.checks)
    }

    pub fn exit_code(&self) -> i32 {
        self.status().exit_code()
    }

    /// Output path `<out_dir>/<run_id>-<name>`.
    pub fn output_path(&self, name: &str) -> PathBuf {
        self.config.out_dir.join(format!("{}-{name}", self.run_id))
    }
}

/// Write every plot in the manifest and return the files written.
pub fn emit_plots(manifest: &RunManifest) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(&manifest.config.out_dir)?;
    manifest
        .plots
        .iter()
        .map(|p| {
            let path = manifest.output_path(p.file());
            fs::write(&path, p.render(&manifest.run_id))?;
            Ok(path)
        })
        .collect()
}
