use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// Record of one run, sufficient to replay it.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: BTreeMap<String, u64>,
    /// Input flag name to path.
    pub inputs: BTreeMap<String, PathBuf>,
    /// Output role to path.
    pub outputs: BTreeMap<String, PathBuf>,
    pub stages: Vec<Stage>,
}

impl RunManifest {
    pub fn new(command: &str, config: &BTreeMap<String, String>) -> Self {
        let seeds = config
            .iter()
            .filter(|(k, _)| k.as_str() == "seed" || k.ends_with("_seed"))
            .filter_map(|(k, v)| Some((k.clone(), v.parse().ok()?)))
            .collect();
        Self {
            command: command.into(),
            version: hybridshape::VERSION.into(),
            config: config.clone(),
            seeds,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            stages: Vec::new(),
        }
    }

    pub fn input(&mut self, flag: &str, path: &Path) {
        self.inputs.insert(flag.into(), path.to_path_buf());
    }

    pub fn output(&mut self, role: &str, path: &Path) {
        self.outputs.insert(role.into(), path.to_path_buf());
    }

    /// Runs `f` and records its wall-clock time under `name`.
    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        let seconds = t.elapsed().as_secs_f64();
        log::info!("stage={name} seconds={seconds:.3}");
        self.stages.push(Stage { name: name.into(), seconds });
        out
    }

    /// Writes `manifest.json` into `dir` through a temporary file and a rename.
    pub fn write_atomic(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        std::fs::write(&tmp, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Command-line arguments that rerun this manifest, writing into `out`.
    pub fn replay_args(&self, out: &Path) -> Vec<String> {
        let mut args = vec![self.command.clone()];
        for (flag, path) in &self.inputs {
            args.push(format!("--{flag}"));
            args.push(path.display().to_string());
        }
        args.push("--out".into());
        args.push(out.display().to_string());
        for (k, v) in &self.config {
            args.push("--set".into());
            args.push(format!("{k}={v}"));
        }
        args
    }
}
