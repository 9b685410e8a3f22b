use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Bad user input: flags, data files or parameter values. Maps to exit 64.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    /// File names relative to the manifest's directory.
    pub artifact_paths: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text)
            .map_err(|e| usage(format!("{} is not a run manifest: {e}", path.display())))
    }
}

/// Collects the files of one run and writes their manifest last.
pub struct Artifacts {
    dir: PathBuf,
    stem: String,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, stem: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            written: Vec::new(),
        })
    }

    /// Writes `<stem><suffix>` and records it.
    pub fn write(&mut self, suffix: &str, contents: &[u8]) -> Result<PathBuf> {
        let name = format!("{}{}", self.stem, suffix);
        let path = self.dir.join(&name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name);
        Ok(path)
    }

    pub fn finish<P: Serialize>(self, command: &str, parameters: &P, seed: u64) -> Result<PathBuf> {
        let parameters = match serde_json::to_value(parameters)? {
            serde_json::Value::Object(map) => map.into_iter().collect(),
            other => BTreeMap::from([("value".to_string(), other)]),
        };
        let manifest = RunManifest {
            command: command.to_string(),
            parameters,
            seed,
            artifact_paths: self.written,
            tool_version: TOOL_VERSION.to_string(),
        };
        let path = self.dir.join(format!("{}.manifest.json", self.stem));
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

pub fn json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn csv_bytes<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .map_err(|e| usage(format!("{} is not a valid {what}: {e}", path.display())))
}
