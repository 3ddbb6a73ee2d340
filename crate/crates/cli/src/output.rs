use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;

/// Output directory plus the list of files written into it.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn csv(&mut self, name: &str) -> Result<Table> {
        let path = self.dir.join(name);
        let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(Table(csv::Writer::from_writer(file)))
    }

    /// `<command>.json` with the config, seed, runtime and a summary.
    pub fn sidecar(&self, cfg: &ExperimentConfig, runtime: Duration, summary: Value) -> Result<PathBuf> {
        let path = self.dir.join(format!("{}.json", cfg.command.name()));
        let doc = json!({
            "tool": "toriclab",
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.seed,
            "config": cfg,
            "runtime_seconds": runtime.as_secs_f64(),
            "files": self.files,
            "summary": summary,
        });
        fs::write(&path, serde_json::to_string_pretty(&doc)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// CSV writer that flushes after every row, so an interrupted run keeps
/// what it has finished.
pub struct Table(csv::Writer<File>);

impl Table {
    pub fn row<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.0.serialize(row)?;
        self.0.flush()?;
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one task of a run, fixed by the run seed and the task's coordinates.
pub fn task_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix(seed), |acc, &x| splitmix(acc ^ x))
}
