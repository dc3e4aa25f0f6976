//! Scoring through an external text-recognition command.
//!
//! Each output image is written as a PGM, the command template is run with
//! `{image}` replaced by its path, and the trimmed stdout is compared with
//! the image's ground-truth text by character accuracy.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use super::{EvalItem, Scorer};
use crate::error::{Error, Result};
use crate::imaging::{save_pgm, GrayImage};
use crate::tensor::Tensor;

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - distance / max(len(truth), 1)`, floored at 0.
pub fn character_accuracy(recognized: &str, truth: &str) -> f64 {
    let d = edit_distance(recognized, truth) as f64;
    let n = truth.chars().count().max(1) as f64;
    (1.0 - d / n).max(0.0)
}

/// What to do when the command fails on one image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailurePolicy {
    /// Drop the image from this combination's mean.
    Skip,
    /// Fail the whole evaluation.
    Abort,
}

impl std::str::FromStr for FailurePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(FailurePolicy::Skip),
            "abort" => Ok(FailurePolicy::Abort),
            other => Err(Error::invalid(format!("unknown failure policy `{other}` (expected skip or abort)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExternalScorer {
    pub template: String,
    pub work_dir: PathBuf,
    pub timeout: Duration,
    pub policy: FailurePolicy,
    pub max_parallel: usize,
}

impl ExternalScorer {
    pub fn new(template: impl Into<String>, work_dir: impl Into<PathBuf>) -> Result<Self> {
        let template = template.into();
        if !template.contains("{image}") {
            return Err(Error::invalid("scorer command must contain the `{image}` placeholder"));
        }
        Ok(ExternalScorer {
            template,
            work_dir: work_dir.into(),
            timeout: Duration::from_secs(30),
            policy: FailurePolicy::Abort,
            max_parallel: 1,
        })
    }

    /// Runs the command on one image file and returns its trimmed stdout.
    pub fn recognize(&self, image: &Path) -> std::result::Result<String, String> {
        let quoted = format!("'{}'", image.display().to_string().replace('\'', r"'\''"));
        let cmd = self.template.replace("{image}", &quoted);
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&cmd)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot start command: {e}"))?;
        let mut stdout = child.stdout.take().expect("stdout is piped");
        let reader = thread::spawn(move || {
            let mut buf = Vec::new();
            stdout.read_to_end(&mut buf).map(|_| buf)
        });
        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(format!("timed out after {:?}", self.timeout));
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => return Err(format!("waiting for command: {e}")),
            }
        };
        let out = reader
            .join()
            .map_err(|_| "stdout reader panicked".to_string())?
            .map_err(|e| format!("reading stdout: {e}"))?;
        if !status.success() {
            return Err(format!("command exited with {status}"));
        }
        String::from_utf8(out)
            .map(|s| s.trim().to_string())
            .map_err(|_| "command output is not UTF-8".to_string())
    }

    fn image_path(&self, id: &str) -> PathBuf {
        let safe: String = id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || "-_.".contains(c) { c } else { '_' })
            .collect();
        self.work_dir.join(format!("{safe}.pgm"))
    }

    fn accuracy_for(&self, item: &EvalItem, output: &Tensor) -> std::result::Result<f64, Error> {
        let truth = item.text.as_deref().ok_or_else(|| Error::Scorer {
            image_id: item.id.clone(),
            reason: "no ground-truth text".into(),
        })?;
        let path = self.image_path(&item.id);
        save_pgm(&GrayImage::from_tensor(output), &path)?;
        let text = self
            .recognize(&path)
            .map_err(|reason| Error::Scorer { image_id: item.id.clone(), reason })?;
        Ok(character_accuracy(&text, truth))
    }
}

impl Scorer for ExternalScorer {
    fn name(&self) -> &str {
        "ocr"
    }

    fn score(&self, items: &[EvalItem], outputs: &[Tensor]) -> Result<f64> {
        fs::create_dir_all(&self.work_dir)
            .map_err(|e| Error::io(format!("creating {}", self.work_dir.display()), e))?;
        let pairs: Vec<(&EvalItem, &Tensor)> = items.iter().zip(outputs).collect();
        let mut results = Vec::with_capacity(pairs.len());
        for chunk in pairs.chunks(self.max_parallel.max(1)) {
            thread::scope(|s| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|&(item, out)| s.spawn(move || self.accuracy_for(item, out)))
                    .collect();
                for h in handles {
                    results.push(h.join().expect("scorer worker panicked"));
                }
            });
        }
        let mut total = 0.0;
        let mut counted = 0usize;
        for r in results {
            match r {
                Ok(acc) => {
                    total += acc;
                    counted += 1;
                }
                Err(e) if self.policy == FailurePolicy::Skip && matches!(e, Error::Scorer { .. }) => {
                    log::warn!("{e}; image skipped");
                }
                Err(e) => return Err(e),
            }
        }
        if counted == 0 {
            return Err(Error::Scorer { image_id: "*".into(), reason: "every image failed".into() });
        }
        Ok(total / counted as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distances() {
        assert_eq!(edit_distance("", ""), 0);
        assert_eq!(edit_distance("abc", ""), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("h3llo", "hello"), 1);
    }

    #[test]
    fn accuracy() {
        assert!((character_accuracy("h3llo", "hello") - 0.8).abs() < 1e-12);
        assert_eq!(character_accuracy("hello", "hello"), 1.0);
        assert_eq!(character_accuracy("completely different", "ab"), 0.0);
        assert_eq!(character_accuracy("", ""), 1.0);
        assert_eq!(character_accuracy("x", ""), 0.0);
    }

    fn items() -> (Vec<EvalItem>, Vec<Tensor>) {
        let t = Tensor::filled(1, 4, 4, 0.5);
        let mk = |id: &str, text: &str| EvalItem {
            id: id.into(),
            lr_upscaled: t.clone(),
            hr: t.clone(),
            text: Some(text.into()),
        };
        (vec![mk("a", "hello"), mk("b", "hellx")], vec![t.clone(), t])
    }

    #[test]
    fn command_output_is_scored() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ExternalScorer::new("test -f {image} && echo hello", dir.path()).unwrap();
        s.max_parallel = 2;
        let (items, outs) = items();
        let score = s.score(&items, &outs).unwrap();
        assert!((score - 0.9).abs() < 1e-12);
        assert!(dir.path().join("a.pgm").is_file());
    }

    #[test]
    fn failures_follow_policy() {
        let dir = tempfile::tempdir().unwrap();
        let (items, outs) = items();
        let mut s = ExternalScorer::new("case {image} in *b.pgm) exit 1;; esac; echo hello", dir.path()).unwrap();
        assert!(matches!(s.score(&items, &outs), Err(Error::Scorer { ref image_id, .. }) if image_id == "b"));
        s.policy = FailurePolicy::Skip;
        assert_eq!(s.score(&items, &outs).unwrap(), 1.0);
    }

    #[test]
    fn timeout_kills_command() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = ExternalScorer::new("sleep 5; echo {image}", dir.path()).unwrap();
        s.timeout = Duration::from_millis(100);
        let start = Instant::now();
        let err = s.recognize(Path::new("x.pgm")).unwrap_err();
        assert!(err.contains("timed out"));
        assert!(start.elapsed() < Duration::from_secs(3));
        assert!(ExternalScorer::new("no placeholder", dir.path()).is_err());
    }
}
