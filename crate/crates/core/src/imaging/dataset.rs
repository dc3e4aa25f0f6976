//! Line-oriented dataset manifests.
//!
//! Each non-comment line is `id<TAB>hr_path<TAB>lr_path<TAB>annotation`
//! (UTF-8; the annotation may be empty). Relative paths are resolved
//! against the directory holding the manifest. A `# split: <name>` comment
//! records which partition the file describes.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{load_pgm, GrayImage};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub hr_path: PathBuf,
    pub lr_path: PathBuf,
    pub annotation: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetManifest {
    entries: Vec<ManifestEntry>,
    split: Option<Split>,
    base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, split: Option<Split>, base_dir: PathBuf) -> Result<Self> {
        let mut seen = HashSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.id.is_empty() || e.id.contains(['\t', '\n']) {
                return Err(Error::Manifest { line: i + 1, reason: format!("invalid id {:?}", e.id) });
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Manifest { line: i + 1, reason: format!("duplicate id `{}`", e.id) });
            }
            if let Some(a) = &e.annotation {
                if a.contains(['\t', '\n']) {
                    return Err(Error::Manifest {
                        line: i + 1,
                        reason: "annotation contains a tab or newline".into(),
                    });
                }
            }
        }
        Ok(DatasetManifest { entries, split, base_dir })
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn split(&self) -> Option<Split> {
        self.split
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn with_split(mut self, split: Option<Split>) -> Self {
        self.split = split;
        self
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn load_hr(&self, entry: &ManifestEntry) -> Result<GrayImage> {
        load_pgm(&self.resolve(&entry.hr_path))
    }

    pub fn load_lr(&self, entry: &ManifestEntry) -> Result<GrayImage> {
        load_pgm(&self.resolve(&entry.lr_path))
    }

    /// Ids whose HR or LR file is missing on disk.
    pub fn missing_files(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|e| !self.resolve(&e.hr_path).is_file() || !self.resolve(&e.lr_path).is_file())
            .map(|e| e.id.clone())
            .collect()
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let mut entries = Vec::new();
        let mut split = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(name) = comment.trim().strip_prefix("split:") {
                    split = Some(name.trim().parse().map_err(|_| Error::Manifest {
                        line: i + 1,
                        reason: format!("unknown split `{}`", name.trim()),
                    })?);
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.splitn(4, '\t').collect();
            if fields.len() < 3 {
                return Err(Error::Manifest {
                    line: i + 1,
                    reason: "expected id, hr_path, lr_path[, annotation] separated by tabs".into(),
                });
            }
            entries.push(ManifestEntry {
                id: fields[0].to_string(),
                hr_path: fields[1].into(),
                lr_path: fields[2].into(),
                annotation: fields.get(3).filter(|a| !a.is_empty()).map(|a| a.to_string()),
            });
        }
        Self::new(entries, split, base_dir)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading manifest {}", path.display()), e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base)
    }

    /// Serializes with paths relative to `base_dir` (absolute paths when written elsewhere).
    pub fn to_text(&self, target_dir: &Path) -> String {
        let mut out = String::new();
        if let Some(s) = self.split {
            out.push_str(&format!("# split: {s}\n"));
        }
        let same_dir = target_dir == self.base_dir;
        for e in &self.entries {
            let path = |p: &Path| {
                if same_dir || p.is_absolute() {
                    p.display().to_string()
                } else {
                    self.base_dir.join(p).display().to_string()
                }
            };
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                e.id,
                path(&e.hr_path),
                path(&e.lr_path),
                e.annotation.as_deref().unwrap_or("")
            ));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        fs::write(path, self.to_text(&dir))
            .map_err(|e| Error::io(format!("writing manifest {}", path.display()), e))
    }

    fn subset(&self, indices: &[usize], split: Split) -> Self {
        DatasetManifest {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            split: Some(split),
            base_dir: self.base_dir.clone(),
        }
    }
}

/// Seeded random partition into `(train, validation)`; entry order is preserved within each part.
pub fn split_dataset(
    manifest: &DatasetManifest,
    validation_count: usize,
    seed: u64,
) -> Result<(DatasetManifest, DatasetManifest)> {
    if validation_count >= manifest.len() {
        return Err(Error::invalid(format!(
            "validation count {validation_count} must be smaller than the {} entries",
            manifest.len()
        )));
    }
    let mut order: Vec<usize> = (0..manifest.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val: Vec<usize> = order[..validation_count].to_vec();
    let mut train: Vec<usize> = order[validation_count..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((manifest.subset(&train, Split::Train), manifest.subset(&val, Split::Validation)))
}

/// Reads `image_id<TAB>text` lines.
pub fn read_annotations(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading annotations {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let (id, t) = line.split_once('\t').ok_or_else(|| Error::Manifest {
            line: i + 1,
            reason: "expected `image_id<TAB>text`".into(),
        })?;
        out.push((id.to_string(), t.to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: usize) -> DatasetManifest {
        let entries = (0..n)
            .map(|i| ManifestEntry {
                id: format!("img{i}"),
                hr_path: format!("hr/img{i}.pgm").into(),
                lr_path: format!("lr/img{i}.pgm").into(),
                annotation: Some(format!("TEXT {i}")),
            })
            .collect();
        DatasetManifest::new(entries, None, PathBuf::from("/data")).unwrap()
    }

    #[test]
    fn split_567_leaves_537() {
        let (train, val) = split_dataset(&manifest(567), 30, 1).unwrap();
        assert_eq!((train.len(), val.len()), (537, 30));
        assert_eq!(train.split(), Some(Split::Train));
    }

    #[test]
    fn split_is_disjoint_exhaustive_and_seeded() {
        for (n, v, seed) in [(10, 3, 0), (50, 30, 9), (2, 1, 4)] {
            let m = manifest(n);
            let (t, va) = split_dataset(&m, v, seed).unwrap();
            let mut ids: Vec<&str> = t.entries().iter().chain(va.entries()).map(|e| e.id.as_str()).collect();
            ids.sort_unstable();
            let mut all: Vec<&str> = m.entries().iter().map(|e| e.id.as_str()).collect();
            all.sort_unstable();
            assert_eq!(ids, all);
            let (t2, _) = split_dataset(&m, v, seed).unwrap();
            assert_eq!(t, t2);
        }
        assert!(split_dataset(&manifest(5), 5, 0).is_err());
    }

    #[test]
    fn text_round_trip_and_duplicates() {
        let m = manifest(3).with_split(Some(Split::Validation));
        let text = m.to_text(Path::new("/data"));
        assert!(text.starts_with("# split: validation\nimg0\thr/img0.pgm\tlr/img0.pgm\tTEXT 0\n"));
        assert_eq!(DatasetManifest::parse(&text, "/data".into()).unwrap(), m);
        assert!(DatasetManifest::parse("a\tx\ty\nb\tx\ty\na\tz\tw\n", "/".into()).is_err());
        assert!(DatasetManifest::parse("a\tx\n", "/".into()).is_err());
        let elsewhere = m.to_text(Path::new("/other"));
        assert!(elsewhere.contains("/data/hr/img0.pgm"));
    }
}
