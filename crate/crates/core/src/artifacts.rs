//! Run directory layout, CSV/JSON readers and writers and the manifest.
//!
//! Every file is written in a fixed order from deterministic values, so
//! identical configurations reproduce identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchgen::LabeledDataset;
use crate::config::RunConfig;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

/// Paths below one run directory.
#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Fails with a dependency error when `rel` has not been produced yet.
    pub fn require(&self, rel: &str, subcommand: &'static str) -> Result<PathBuf> {
        let p = self.path(rel);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Error::MissingArtifact { path: p, subcommand })
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.path(MANIFEST)
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(())
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    create_parent(path)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Shortest representation that parses back to the same value.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Writes a header row and data rows with LF line endings.
pub fn write_csv<R, I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    R: IntoIterator<Item = String>,
    I: IntoIterator<Item = R>,
{
    create_parent(path)?;
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// `x1,...,xn,target` rows.
pub fn write_dataset(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut header: Vec<String> = (1..=data.dim()).map(|i| format!("x{i}")).collect();
    header.push("target".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = data.inputs.iter().zip(&data.targets).map(|(x, t)| x.iter().chain(std::iter::once(t)).map(|v| num(*v)).collect::<Vec<_>>());
    write_csv(path, &header, rows)
}

pub fn read_dataset(path: &Path, seed: u64) -> Result<LabeledDataset> {
    let (header, rows) = read_rows(path)?;
    if header.last().map(String::as_str) != Some("target") {
        return Err(Error::Config(format!("{}: last column must be `target`", path.display())));
    }
    let mut inputs = Vec::with_capacity(rows.len());
    let mut targets = Vec::with_capacity(rows.len());
    for mut row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch { expected: header.len(), got: row.len() });
        }
        targets.push(row.pop().expect("non-empty row"));
        inputs.push(row);
    }
    LabeledDataset::new(inputs, targets, seed)
}

/// Unlabeled `x1,...,xn` rows.
pub fn write_points(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let dim = points.first().map_or(0, Vec::len);
    let header: Vec<String> = (1..=dim).map(|i| format!("x{i}")).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, points.iter().map(|x| x.iter().map(|v| num(*v)).collect::<Vec<_>>()))
}

pub fn read_points(path: &Path) -> Result<Vec<Vec<f64>>> {
    Ok(read_rows(path)?.1)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    /// Settings that determine the stage's outputs.
    pub settings: serde_json::Value,
    pub files: Vec<FileEntry>,
}

/// Index of everything in a run directory. Holds no timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub stages: BTreeMap<String, StageEntry>,
}

impl Manifest {
    fn empty(config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            stages: BTreeMap::new(),
        }
    }

    /// Loads the manifest of `dir`, or starts a new one.
    pub fn open(dir: &RunDir, config: &RunConfig) -> Result<Self> {
        let path = dir.manifest_path();
        let mut m = if path.is_file() { read_json::<Manifest>(&path)? } else { Self::empty(config) };
        m.config = config.clone();
        Ok(m)
    }

    /// Replaces the entry of `stage` with digests of `files` (relative paths).
    pub fn record(&mut self, dir: &RunDir, stage: &str, settings: serde_json::Value, files: &[String]) -> Result<()> {
        let mut sorted = files.to_vec();
        sorted.sort();
        sorted.dedup();
        let files = sorted
            .into_iter()
            .map(|rel| Ok(FileEntry { sha256: sha256_file(&dir.path(&rel))?, path: rel }))
            .collect::<Result<Vec<_>>>()?;
        self.stages.insert(stage.to_owned(), StageEntry { settings, files });
        Ok(())
    }

    pub fn save(&self, dir: &RunDir) -> Result<()> {
        write_json(&dir.manifest_path(), self)
    }
}
