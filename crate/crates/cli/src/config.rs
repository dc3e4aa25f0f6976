//! Flat key-value run configuration.
//!
//! A config file is a TOML table of scalar keys. Every key is checked
//! against [`SCHEMA`] when the file is read, so a typo fails before any
//! work starts. Command-line flags are written over the file values, and
//! each command records the values it actually used (defaults included)
//! as `config.toml` in its run directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Text,
    Path,
    Integer,
    Float,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Kind::Text => "a string",
            Kind::Path => "a path string",
            Kind::Integer => "a non-negative integer",
            Kind::Float => "a number",
        })
    }
}

const SCHEMA: &[(&str, Kind)] = &[
    ("spec", Kind::Text),
    ("train_manifest", Kind::Path),
    ("validation_manifest", Kind::Path),
    ("eval_manifest", Kind::Path),
    ("runs_root", Kind::Path),
    ("seed", Kind::Integer),
    ("lr_last", Kind::Float),
    ("lr_other", Kind::Float),
    ("momentum", Kind::Float),
    ("weight_std", Kind::Float),
    ("batch_size", Kind::Integer),
    ("max_iterations", Kind::Integer),
    ("checkpoint_every", Kind::Integer),
    ("eval_every", Kind::Integer),
    ("eval_border", Kind::Text),
    ("border", Kind::Text),
    ("count", Kind::Integer),
    ("validation_count", Kind::Integer),
    ("ingest_dir", Kind::Path),
    ("grid", Kind::Text),
    ("seeds", Kind::Integer),
    ("checkpoint", Kind::Path),
    ("combination", Kind::Path),
    ("sr_dir", Kind::Path),
    ("scorer", Kind::Text),
    ("ocr_cmd", Kind::Text),
    ("ocr_timeout_secs", Kind::Integer),
    ("ocr_failure", Kind::Text),
    ("ocr_parallel", Kind::Integer),
    ("max_rounds", Kind::Integer),
];

fn kind_of(key: &str) -> Option<Kind> {
    SCHEMA.iter().find(|(k, _)| *k == key).map(|&(_, kind)| kind)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: Table,
}

impl RunConfig {
    /// Parses and validates a config file body; relative paths are taken
    /// relative to `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let table: Table = text.parse().map_err(|e| CliError::config(format!("config: {e}")))?;
        let mut values = Table::new();
        for (key, value) in table {
            let kind = kind_of(&key).ok_or_else(|| CliError::config(format!("config: unknown key `{key}`")))?;
            let checked = match (kind, value) {
                (Kind::Text, v @ Value::String(_)) => v,
                (Kind::Path, Value::String(s)) => Value::String(base_dir.join(s).display().to_string()),
                (Kind::Integer, Value::Integer(i)) if i >= 0 => Value::Integer(i),
                (Kind::Float, Value::Float(f)) => Value::Float(f),
                (Kind::Float, Value::Integer(i)) => Value::Float(i as f64),
                (kind, v) => {
                    return Err(CliError::config(format!("config: `{key}` must be {kind}, found `{v}`")));
                }
            };
            values.insert(key, checked);
        }
        Ok(RunConfig { values })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io_at(format!("reading {}", path.display()), e))?;
        let base = absolute(path.parent().unwrap_or(Path::new("")));
        Self::parse(&text, &base)
    }

    fn checked_kind(key: &str, expected: Kind) {
        assert_eq!(kind_of(key), Some(expected), "`{key}` is not a {expected:?} key");
    }

    pub fn set_text(&mut self, key: &str, value: Option<&str>) {
        Self::checked_kind(key, Kind::Text);
        if let Some(v) = value {
            self.values.insert(key.into(), Value::String(v.into()));
        }
    }

    pub fn set_path(&mut self, key: &str, value: Option<&Path>) {
        Self::checked_kind(key, Kind::Path);
        if let Some(v) = value {
            self.values.insert(key.into(), Value::String(absolute(v).display().to_string()));
        }
    }

    pub fn set_int(&mut self, key: &str, value: Option<u64>) -> CliResult<()> {
        Self::checked_kind(key, Kind::Integer);
        if let Some(v) = value {
            let v = i64::try_from(v).map_err(|_| CliError::config(format!("`{key}` = {v} is too large")))?;
            self.values.insert(key.into(), Value::Integer(v));
        }
        Ok(())
    }

    pub fn set_float(&mut self, key: &str, value: Option<f64>) {
        Self::checked_kind(key, Kind::Float);
        if let Some(v) = value {
            self.values.insert(key.into(), Value::Float(v));
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.values.get(key).and_then(Value::as_str)
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.text(key).map(PathBuf::from)
    }

    pub fn int(&self, key: &str) -> Option<u64> {
        self.values.get(key).and_then(Value::as_integer).map(|v| v as u64)
    }

    pub fn float(&self, key: &str) -> Option<f64> {
        self.values.get(key).and_then(Value::as_float)
    }

    /// The value of `key`, or `default` (which is then recorded).
    pub fn resolve_int(&mut self, key: &str, default: u64) -> CliResult<u64> {
        if self.int(key).is_none() {
            self.set_int(key, Some(default))?;
        }
        Ok(self.int(key).unwrap_or(default))
    }

    pub fn resolve_float(&mut self, key: &str, default: f64) -> f64 {
        if self.float(key).is_none() {
            self.set_float(key, Some(default));
        }
        self.float(key).unwrap_or(default)
    }

    /// Parses the text value of `key` (or `default`, which is then recorded).
    pub fn resolve_parsed<T>(&mut self, key: &str, default: &str) -> CliResult<T>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if self.text(key).is_none() {
            self.set_text(key, Some(default));
        }
        let raw = self.text(key).unwrap_or(default);
        raw.parse().map_err(|e| CliError::config(format!("`{key}`: {e}")))
    }

    pub fn require_path(&self, key: &str, hint: &str) -> CliResult<PathBuf> {
        self.path(key).ok_or_else(|| CliError::config(format!("`{key}` is not set ({hint})")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.values).expect("scalar tables always serialize")
    }

    pub fn write_snapshot(&self, dir: &Path) -> CliResult<()> {
        let path = dir.join("config.toml");
        fs::write(&path, self.to_toml()).map_err(|e| CliError::io_at(format!("writing {}", path.display()), e))
    }
}

pub fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}
