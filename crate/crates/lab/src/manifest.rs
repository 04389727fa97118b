//! The run manifest: the resolved config followed by provenance and result
//! keys. The config loader skips `manifest.*` and `result.*`, so the file can
//! be passed back with `--config` to repeat the run.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{Context, Result};

use crate::config::ExperimentConfig;

pub const FILE_NAME: &str = "manifest.txt";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub config: Vec<(String, String)>,
    /// Epoch sizes indexed from epoch 1, after any snapping.
    pub epoch_sizes: Vec<u64>,
    pub modulus: Option<u64>,
    pub artifacts: Vec<String>,
    pub results: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        RunManifest {
            config: config
                .settings
                .iter()
                .map(|(k, v)| (k.to_owned(), v.to_owned()))
                .collect(),
            ..Self::default()
        }
    }

    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.to_owned());
    }

    pub fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_owned(), value.to_string()));
    }

    pub fn result_value(&self, key: &str) -> Option<&str> {
        self.results.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.config {
            let _ = writeln!(s, "{k}={v}");
        }
        let _ = writeln!(s, "manifest.version={}", env!("CARGO_PKG_VERSION"));
        let join = |xs: &[u64]| xs.iter().map(u64::to_string).collect::<Vec<_>>().join(",");
        if !self.epoch_sizes.is_empty() {
            let mut top_first = self.epoch_sizes.clone();
            top_first.reverse();
            let _ = writeln!(s, "manifest.epoch_sizes={}", join(&top_first));
        }
        if let Some(d) = self.modulus {
            let _ = writeln!(s, "manifest.delta={d}");
        }
        let _ = writeln!(s, "manifest.artifacts={}", self.artifacts.join(","));
        for (k, v) in &self.results {
            let _ = writeln!(s, "result.{k}={v}");
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}
