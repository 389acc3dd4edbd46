use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use qee_core::fixtures::sha256_hex;
use serde::Serialize;

use crate::error::{Classify, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to replay a run: `qee <args>` with the same inputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<InputFile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<String>,
    pub seeds: Vec<u64>,
    pub parallel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock milliseconds per phase.
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, threads: Option<usize>) -> Self {
        Self {
            tool: "qee",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args,
            inputs: Vec::new(),
            filter: None,
            seeds: Vec::new(),
            parallel: qee_core::par::is_parallel(),
            threads,
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display())).input()?;
        self.record_input(path, &bytes);
        Ok(bytes)
    }

    pub fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputFile {
            path: path.to_path_buf(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Run `f`, recording its wall time under `phase`.
    pub fn time<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings_ms.entry(phase.to_string()).or_default() += t.elapsed().as_secs_f64() * 1e3;
        out
    }

    pub fn write(&mut self, path: &Path, contents: &str) -> CliResult<()> {
        std::fs::write(path, contents).map_err(|e| anyhow::anyhow!("{}: {e}", path.display())).input()?;
        self.outputs.push(path.to_path_buf());
        Ok(())
    }
}
