//! Loading datasets, checkpoints and combination files from disk.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use textsr::ensemble::EvalItem;
use textsr::imaging::{read_annotations, DatasetManifest, ManifestEntry};
use textsr::network::load_checkpoint;
use textsr::training::ImagePair;
use textsr::Network;

use crate::config::absolute;
use crate::error::{CliError, CliResult};

pub fn read_manifest(path: &Path) -> CliResult<DatasetManifest> {
    let manifest = DatasetManifest::read(path)?;
    let missing = manifest.missing_files();
    if !missing.is_empty() {
        return Err(CliError::io(format!(
            "{}: image files missing for {}",
            path.display(),
            missing.join(", ")
        )));
    }
    Ok(manifest)
}

pub fn image_pairs(manifest: &DatasetManifest) -> CliResult<Vec<ImagePair>> {
    manifest
        .entries()
        .iter()
        .map(|e| Ok(ImagePair::from_images(&e.id, &manifest.load_hr(e)?, &manifest.load_lr(e)?)?))
        .collect()
}

pub fn eval_items(manifest: &DatasetManifest) -> CliResult<Vec<EvalItem>> {
    let pairs = image_pairs(manifest)?;
    Ok(pairs
        .into_iter()
        .zip(manifest.entries())
        .map(|(p, e)| EvalItem { id: p.id, lr_upscaled: p.lr_upscaled, hr: p.hr, text: e.annotation.clone() })
        .collect())
}

fn files_with_extension(dir: &Path, ext: &str) -> CliResult<BTreeMap<String, PathBuf>> {
    let read = fs::read_dir(dir).map_err(|e| CliError::io_at(format!("listing {}", dir.display()), e))?;
    let mut out = BTreeMap::new();
    for entry in read {
        let path = entry.map_err(|e| CliError::io_at(format!("listing {}", dir.display()), e))?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(out)
}

/// `*.pgm` files in a directory, keyed by file stem.
pub fn pgm_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    files_with_extension(dir, "pgm")
}

/// Files given directly plus every `*.<ext>` directly inside the given directories.
pub fn expand_inputs(inputs: &[PathBuf], ext: &str) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(files_with_extension(p, ext)?.into_values());
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(CliError::io(format!("{} does not exist", p.display())));
        }
    }
    Ok(out)
}

/// Builds a manifest over `dir/hr/<id>.pgm` and `dir/lr/<id>.pgm`, with
/// annotations from `dir/annotations.tsv` when present. Every HR image
/// needs an LR partner and vice versa.
pub fn ingest(dir: &Path) -> CliResult<DatasetManifest> {
    let root = dir.canonicalize().map_err(|e| CliError::io_at(format!("opening {}", dir.display()), e))?;
    let hr = pgm_files(&root.join("hr"))?;
    let lr = pgm_files(&root.join("lr"))?;
    let no_lr: Vec<&str> = hr.keys().filter(|id| !lr.contains_key(*id)).map(String::as_str).collect();
    let no_hr: Vec<&str> = lr.keys().filter(|id| !hr.contains_key(*id)).map(String::as_str).collect();
    if !no_lr.is_empty() || !no_hr.is_empty() {
        let mut parts = Vec::new();
        if !no_lr.is_empty() {
            parts.push(format!("missing LR partner for {}", no_lr.join(", ")));
        }
        if !no_hr.is_empty() {
            parts.push(format!("missing HR partner for {}", no_hr.join(", ")));
        }
        return Err(CliError::io(format!("{}: {}", root.display(), parts.join("; "))));
    }
    if hr.is_empty() {
        return Err(CliError::io(format!("no .pgm images under {}", root.join("hr").display())));
    }
    let annotation_file = root.join("annotations.tsv");
    let mut annotations: BTreeMap<String, String> = if annotation_file.is_file() {
        read_annotations(&annotation_file)?.into_iter().collect()
    } else {
        BTreeMap::new()
    };
    let entries = hr
        .into_iter()
        .map(|(id, hr_path)| ManifestEntry {
            annotation: annotations.remove(&id),
            lr_path: lr[&id].clone(),
            hr_path,
            id,
        })
        .collect();
    for id in annotations.keys() {
        log::warn!("annotation for unknown image `{id}` ignored");
    }
    Ok(DatasetManifest::new(entries, None, root)?)
}

pub fn load_network(path: &Path) -> CliResult<Network> {
    Ok(load_checkpoint(path)?.network)
}

/// Member checkpoint paths of a combination file, resolved against its directory.
pub fn read_combination(path: &Path) -> CliResult<Vec<PathBuf>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io_at(format!("reading {}", path.display()), e))?;
    let base = absolute(path.parent().unwrap_or(Path::new("")));
    let members: Vec<PathBuf> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    if members.is_empty() {
        return Err(CliError::config(format!("{} lists no checkpoints", path.display())));
    }
    Ok(members)
}

pub fn write_combination(path: &Path, members: &[String]) -> CliResult<()> {
    let mut text = String::new();
    for m in members {
        text.push_str(m);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::io_at(format!("writing {}", path.display()), e))
}

/// Loads each distinct checkpoint once; returns the networks and, per member, its index.
pub fn load_members(paths: &[PathBuf]) -> CliResult<(Vec<Network>, Vec<usize>)> {
    let mut index: BTreeMap<&Path, usize> = BTreeMap::new();
    let mut nets = Vec::new();
    let mut members = Vec::with_capacity(paths.len());
    for p in paths {
        let i = match index.get(p.as_path()) {
            Some(&i) => i,
            None => {
                nets.push(load_network(p)?);
                index.insert(p, nets.len() - 1);
                nets.len() - 1
            }
        };
        members.push(i);
    }
    Ok((nets, members))
}

/// Reference ids without an output, as a readable message; outputs
/// without a reference are only logged.
pub fn id_mismatch(expected: &BTreeSet<&str>, found: &BTreeSet<&str>) -> Option<String> {
    let extra: Vec<&str> = found.difference(expected).copied().collect();
    if !extra.is_empty() {
        log::warn!("ignoring {} output(s) without a reference: {}", extra.len(), extra.join(", "));
    }
    let missing: Vec<&str> = expected.difference(found).copied().collect();
    (!missing.is_empty()).then(|| format!("no output for {}", missing.join(", ")))
}
