//! Provenance and all-or-nothing output writing.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub master_seed: u64,
    /// Effective configuration after command-line overrides.
    pub config: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> anyhow::Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: cfg.hash()?,
            master_seed: cfg.master_seed,
            config: cfg.to_toml()?,
        })
    }
}

#[derive(Debug, Serialize)]
struct FileEntry {
    name: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    provenance: &'a Provenance,
    files: Vec<FileEntry>,
}

/// Files produced by one command, held in memory until every one is ready.
pub struct Outputs {
    provenance: Provenance,
    files: Vec<(String, Vec<u8>)>,
}

impl Outputs {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            provenance,
            files: Vec::new(),
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    /// Writes every file plus `<command>_manifest.json` into `dir`. Each file is
    /// written to a temporary sibling and renamed into place.
    pub fn commit(mut self, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
        let manifest = Manifest {
            provenance: &self.provenance,
            files: self
                .files
                .iter()
                .map(|(name, bytes)| FileEntry {
                    name: name.clone(),
                    sha256: hex::encode(Sha256::digest(bytes)),
                })
                .collect(),
        };
        let mut json = serde_json::to_vec_pretty(&manifest)?;
        json.push(b'\n');
        let manifest_name = format!(
            "{}_manifest.json",
            self.provenance.command.replace(' ', "_")
        );
        self.files.push((manifest_name, json));

        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, bytes) in &self.files {
            let target = dir.join(name);
            let mut tmp = tempfile::NamedTempFile::new_in(dir)
                .with_context(|| format!("creating temporary file in {}", dir.display()))?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(&target)
                .with_context(|| format!("writing {}", target.display()))?;
            written.push(target);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_writes_files_and_manifest() {
        let cfg = ExperimentConfig::parse(
            "master_seed = 3\n[offspring]\nfamily = \"poisson1\"\n\
             [immigration]\nfamily = \"poisson_seq\"\nalpha = { exponent = 0.5 }\n",
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(Provenance::new("check zeta", &cfg).unwrap());
        out.add("a.csv", b"x\n1\n".to_vec());
        let paths = out.commit(dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let manifest =
            std::fs::read_to_string(dir.path().join("check_zeta_manifest.json")).unwrap();
        assert!(manifest.contains("config_sha256"));
        assert!(manifest.contains("a.csv"));
        let names: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(names.len(), 2, "no temporary files left behind");
    }
}
