//! Run manifests: what produced which artifact.
//!
//! Manifests record the config hash, seeds, code version, and wall-clock
//! timing. Timing lives only here; report files contain none, so identical
//! runs produce byte-identical reports.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub derived_seeds: Vec<(String, u64)>,
    pub code_version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
}

impl ManifestBuilder {
    pub fn start(command: &str, config_hash: u64, master_seed: u64) -> Self {
        Self {
            manifest: RunManifest {
                command: command.to_string(),
                config_hash: format!("{config_hash:016x}"),
                master_seed,
                derived_seeds: Vec::new(),
                code_version: env!("CARGO_PKG_VERSION").to_string(),
                started_unix: now(),
                finished_unix: 0,
                outputs: Vec::new(),
            },
        }
    }

    pub fn seed(&mut self, label: &str, value: u64) -> &mut Self {
        self.manifest.derived_seeds.push((label.to_string(), value));
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.display().to_string());
        self
    }

    pub fn finish(mut self, dir: &Path) -> anyhow::Result<()> {
        self.manifest.finished_unix = now();
        let path = dir.join("manifest.json");
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        serde_json::to_writer_pretty(&mut f, &self.manifest)?;
        use std::io::Write;
        f.write_all(b"\n")?;
        Ok(())
    }
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
