//! Canonical JSON, provenance stamps and checksum manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, UcipError};
use crate::harness::config::ExperimentConfig;

pub const ARTIFACT_VERSION: &str = concat!("ucip-", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub thresholds_hash: String,
    pub seed: u64,
    pub artifact_version: String,
}

impl Provenance {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            config_hash: cfg.hash(),
            thresholds_hash: cfg.thresholds.hash(),
            seed: cfg.seed,
            artifact_version: ARTIFACT_VERSION.into(),
        }
    }
}

/// Pretty JSON with object keys sorted; identical values give identical bytes.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Map is ordered by key, so the round trip sorts every object
    let v = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&v)?;
    text.push('\n');
    Ok(text)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    /// File name to SHA-256 of its bytes.
    pub files: BTreeMap<String, String>,
}

/// Collects the files of one run so the manifest can checksum them.
#[derive(Debug)]
pub struct OutputSink {
    dir: PathBuf,
    config: ExperimentConfig,
    provenance: Provenance,
    files: BTreeMap<String, String>,
}

impl OutputSink {
    pub fn create(dir: &Path, config: &ExperimentConfig) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config: config.clone(),
            provenance: Provenance::of(config),
            files: BTreeMap::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if name == MANIFEST_FILE || name.contains(['/', '\\']) {
            return Err(UcipError::Argument(format!("invalid output name `{name}`")));
        }
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.files.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Writes a JSON object with a `provenance` field added.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut v = serde_json::to_value(value)?;
        match &mut v {
            Value::Object(map) => {
                map.insert("provenance".into(), serde_json::to_value(&self.provenance)?);
            }
            other => {
                let inner = std::mem::take(other);
                let mut map = serde_json::Map::new();
                map.insert("data".into(), inner);
                map.insert("provenance".into(), serde_json::to_value(&self.provenance)?);
                v = Value::Object(map);
            }
        }
        let text = canonical_json(&v)?;
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes a CSV table preceded by a `#` provenance comment line.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let p = &self.provenance;
        let mut out = format!(
            "# config_hash={} thresholds_hash={} seed={} artifact_version={}\n",
            p.config_hash, p.thresholds_hash, p.seed, p.artifact_version
        )
        .into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(header)?;
            for r in rows {
                w.write_record(r)?;
            }
            w.flush()?;
        }
        self.write_bytes(name, &out)
    }

    /// Writes `manifest.json` covering every file written so far.
    pub fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            provenance: self.provenance,
            config: self.config,
            files: self.files,
        };
        fs::write(self.dir.join(MANIFEST_FILE), canonical_json(&manifest)?)?;
        Ok(manifest)
    }
}

/// Renders a float for CSV output.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else {
        String::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys() {
        let mut m = BTreeMap::new();
        m.insert("b", 1);
        m.insert("a", 2);
        let text = canonical_json(&m).unwrap();
        assert!(text.find("\"a\"").unwrap() < text.find("\"b\"").unwrap());
        #[derive(Serialize)]
        struct S {
            zeta: u8,
            alpha: u8,
        }
        let text = canonical_json(&S { zeta: 1, alpha: 2 }).unwrap();
        assert!(text.find("alpha").unwrap() < text.find("zeta").unwrap());
    }

    #[test]
    fn sink_writes_manifest_with_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::standard();
        let mut sink = OutputSink::create(dir.path(), &cfg).unwrap();
        sink.write_json("a.json", &serde_json::json!({"x": 1})).unwrap();
        sink.write_csv("b.csv", &["k", "v"], &[vec!["1".into(), "2".into()]]).unwrap();
        assert!(sink.write_json("manifest.json", &1).is_err());
        let manifest = sink.finish().unwrap();
        assert_eq!(manifest.files.len(), 2);
        let bytes = fs::read(dir.path().join("a.json")).unwrap();
        assert_eq!(manifest.files["a.json"], sha256_hex(&bytes));
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["provenance"]["seed"], 42);
        assert_eq!(v["provenance"]["thresholds_hash"], cfg.thresholds.hash());
        let csv_text = fs::read_to_string(dir.path().join("b.csv")).unwrap();
        assert!(csv_text.starts_with("# config_hash="));
        assert!(csv_text.contains("k,v\n1,2\n"));
    }
}
