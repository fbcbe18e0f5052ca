//! Dataset manifests: CSV files listing `subject_id,path,label`.
//!
//! An optional leading comment `# format_version=<v>` records the manifest
//! version. Relative paths resolve against the manifest's directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::connectome::{load_connectome, write_connectome, Connectome, Population};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: &str = "1";
const HEADER: [&str; 3] = ["subject_id", "path", "label"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub path: PathBuf,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub format_version: String,
    /// Directory that relative entry paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Self {
        Self { entries, format_version: FORMAT_VERSION.to_string(), base_dir: base_dir.into() }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let format_version = text
            .lines()
            .next()
            .and_then(|l| l.trim().strip_prefix('#'))
            .and_then(|l| l.trim().strip_prefix("format_version="))
            .map(|v| v.trim().to_string())
            .unwrap_or_else(|| FORMAT_VERSION.to_string());

        let mut reader =
            csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = reader.headers().map_err(|e| Error::Manifest(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::Manifest(format!(
                "expected header {}, found {}",
                HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let entries = reader
            .deserialize::<ManifestEntry>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Manifest(e.to_string()))?;
        if entries.is_empty() {
            return Err(Error::Manifest("no entries".into()));
        }
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { entries, format_version, base_dir })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = format!("# format_version={}\n", self.format_version).into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            for e in &self.entries {
                w.serialize(e).map_err(|e| Error::Manifest(e.to_string()))?;
            }
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        fs::write(path, buf).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Distinct class labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        let mut labels: Vec<String> = self.entries.iter().map(|e| e.label.clone()).collect();
        labels.sort();
        labels.dedup();
        labels
    }

    /// Loads every subject, grouped by class label; manifest order is kept
    /// within each class.
    pub fn load_populations(&self) -> Result<BTreeMap<String, Population>> {
        let mut groups: BTreeMap<String, (Vec<String>, Vec<Connectome>)> = BTreeMap::new();
        for e in &self.entries {
            let c = load_connectome(self.resolve(e))?;
            let g = groups.entry(e.label.clone()).or_default();
            g.0.push(e.subject_id.clone());
            g.1.push(c);
        }
        groups
            .into_iter()
            .map(|(label, (ids, subjects))| {
                let pop = Population::new(label.clone(), ids, subjects)?;
                Ok((label, pop))
            })
            .collect()
    }

    /// Loads a manifest that must contain exactly two classes.
    pub fn load_two_classes(&self) -> Result<(Population, Population)> {
        let mut pops = self.load_populations()?;
        if pops.len() != 2 {
            return Err(Error::Manifest(format!("expected exactly two classes, found {}", pops.len())));
        }
        let (_, a) = pops.pop_first().expect("two entries");
        let (_, b) = pops.pop_first().expect("two entries");
        Ok((a, b))
    }

    /// SHA-256 over the manifest entries and the bytes of every referenced
    /// matrix file, in manifest order.
    pub fn digest(&self) -> Result<String> {
        let mut h = Sha256::new();
        h.update(format!("format_version={}\n", self.format_version));
        for e in &self.entries {
            h.update(format!("{},{},{}\n", e.subject_id, e.path.display(), e.label));
            let p = self.resolve(e);
            let bytes = fs::read(&p).map_err(|err| Error::io(&p, err))?;
            h.update(&bytes);
        }
        Ok(hex::encode(h.finalize()))
    }
}

/// Writes populations as matrix CSVs under `dir` plus `dir/manifest.csv`.
/// Matrix files are named `<subject_id>.csv`.
pub fn write_dataset(dir: impl AsRef<Path>, populations: &[&Population]) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for p in populations {
        for (id, c) in p.subject_ids().iter().zip(p.subjects()) {
            let file = PathBuf::from(format!("{id}.csv"));
            write_connectome(c, dir.join(&file))?;
            entries.push(ManifestEntry { subject_id: id.clone(), path: file, label: p.class_label().to_string() });
        }
    }
    let manifest = DatasetManifest::new(entries, dir);
    manifest.write(dir.join("manifest.csv"))?;
    Ok(manifest)
}
