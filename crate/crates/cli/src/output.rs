//! CSV and manifest writers. Formatting is deterministic so that identical
//! configurations reproduce byte-identical outputs.

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::Path;

pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn write_csv<P: AsRef<Path>>(
    path: P,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())
        .with_context(|| format!("creating {}", path.as_ref().display()))?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub kind: String,
    pub version: String,
    pub seed: u64,
    pub config_sha256: String,
    pub aggregates: serde_json::Value,
}

impl Manifest {
    pub fn new(kind: &str, seed: u64, config_text: &str, aggregates: serde_json::Value) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(config_text.as_bytes());
        Self {
            kind: kind.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_sha256: format!("{:x}", hasher.finalize()),
            aggregates,
        }
    }
}

pub fn write_json<P: AsRef<Path>, T: Serialize>(path: P, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path.as_ref(), text)
        .with_context(|| format!("writing {}", path.as_ref().display()))?;
    Ok(())
}

pub fn ensure_dir<P: AsRef<Path>>(dir: P) -> Result<()> {
    fs::create_dir_all(dir.as_ref())
        .with_context(|| format!("creating {}", dir.as_ref().display()))?;
    Ok(())
}
