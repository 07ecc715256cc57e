//! Output directory handling: CSV tables, JSON files and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gramor::io::{AnySystem, SystemFile};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Arguments after the program name; replayed by `rerun`.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub effective: BTreeMap<String, serde_json::Value>,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<PathBuf>,
    /// Wall-clock seconds per stage; informational only.
    pub timings: BTreeMap<String, f64>,
}

/// Collects artifacts and metadata for one run.
pub struct Run {
    pub out: PathBuf,
    pub seed: u64,
    manifest: Manifest,
}

impl Run {
    pub fn new(
        out: PathBuf,
        seed: u64,
        argv: Vec<String>,
        config: serde_json::Value,
    ) -> Result<Self> {
        fs::create_dir_all(&out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Self {
            out,
            seed,
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                argv,
                config,
                effective: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                timings: BTreeMap::new(),
            },
        })
    }

    /// Reads an input file and records its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<(Vec<u8>, String)> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let sha = sha256_hex(&bytes);
        if !self.manifest.inputs.iter().any(|r| r.path == path) {
            self.manifest.inputs.push(InputRecord {
                path: path.to_path_buf(),
                sha256: sha.clone(),
            });
        }
        Ok((bytes, sha))
    }

    pub fn load_system(&mut self, path: &Path) -> Result<(SystemFile, AnySystem, String)> {
        let (bytes, sha) = self.read_input(path)?;
        let text =
            String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))?;
        let file =
            SystemFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        let sys = file
            .to_system()
            .with_context(|| format!("validating {}", path.display()))?;
        Ok((file, sys, sha))
    }

    pub fn effective(&mut self, key: &str, value: impl Serialize) {
        self.manifest.effective.insert(
            key.into(),
            serde_json::to_value(value).unwrap_or(serde_json::Value::Null),
        );
    }

    pub fn timing(&mut self, stage: &str, seconds: f64) {
        self.manifest.timings.insert(stage.into(), seconds);
    }

    fn record_output(&mut self, path: &Path) {
        if !self.manifest.outputs.iter().any(|p| p == path) {
            self.manifest.outputs.push(path.to_path_buf());
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        self.record_output(path);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<PathBuf> {
        let path = self.path(name);
        self.write_text(&path, &serde_json::to_string_pretty(value)?)?;
        Ok(path)
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<PathBuf> {
        let path = self.path(name);
        let mut w =
            csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.record_output(&path);
        Ok(path)
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        let path = self.out.join(MANIFEST);
        let text = serde_json::to_string_pretty(&self.manifest)?;
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.outputs.push(path.clone());
        Ok(path)
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
}

/// Two-column `t,value` table; a non-numeric first row is taken as a header.
pub fn read_table(bytes: &[u8]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let (mut ts, mut vs) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            anyhow::bail!("table row {} has fewer than two columns", i + 1);
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(t), Ok(v)) => {
                ts.push(t);
                vs.push(v);
            }
            _ if i == 0 => {}
            _ => anyhow::bail!("table row {} is not numeric", i + 1),
        }
    }
    Ok((ts, vs))
}
