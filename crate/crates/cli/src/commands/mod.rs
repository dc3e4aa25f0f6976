pub mod combine;
pub mod evaluate;
pub mod grid;
pub mod infer;
pub mod prepare;
pub mod train;

use std::path::{Path, PathBuf};
use std::time::Duration;

use textsr::ensemble::{ExternalScorer, FailurePolicy};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const DEFAULT_OCR_TIMEOUT_SECS: u64 = 30;

/// External text-recognition command settings.
#[derive(clap::Args, Debug, Default)]
pub struct OcrFlags {
    /// Recognition command; `{image}` is replaced by the path of a PGM file
    /// and the trimmed stdout is taken as the recognized text.
    #[arg(long, value_name = "CMD")]
    ocr_cmd: Option<String>,
    /// Seconds before a recognition call is killed [default: 30].
    #[arg(long)]
    ocr_timeout_secs: Option<u64>,
    /// On a failed recognition call: skip the image or abort [default: abort].
    #[arg(long)]
    ocr_failure: Option<String>,
    /// Concurrent recognition calls [default: 1].
    #[arg(long)]
    ocr_parallel: Option<u64>,
}

impl OcrFlags {
    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        cfg.set_text("ocr_cmd", self.ocr_cmd.as_deref());
        cfg.set_int("ocr_timeout_secs", self.ocr_timeout_secs)?;
        cfg.set_text("ocr_failure", self.ocr_failure.as_deref());
        cfg.set_int("ocr_parallel", self.ocr_parallel)
    }
}

/// The configured external scorer, or `None` when no command is set.
pub fn external_scorer(cfg: &mut RunConfig, work_dir: &Path) -> CliResult<Option<ExternalScorer>> {
    let Some(cmd) = cfg.text("ocr_cmd").map(str::to_string) else {
        return Ok(None);
    };
    let mut scorer = ExternalScorer::new(cmd, work_dir)?;
    scorer.timeout = Duration::from_secs(cfg.resolve_int("ocr_timeout_secs", DEFAULT_OCR_TIMEOUT_SECS)?);
    scorer.policy = cfg.resolve_parsed::<FailurePolicy>("ocr_failure", "abort")?;
    scorer.max_parallel = cfg.resolve_int("ocr_parallel", 1)?.max(1) as usize;
    Ok(Some(scorer))
}

/// Sets `eval_manifest` from `--manifest`, or from `--data DIR` as `DIR/validation.tsv`.
pub fn apply_eval_manifest(cfg: &mut RunConfig, data: Option<&Path>, manifest: Option<&Path>) {
    let from_data: Option<PathBuf> = data.map(|d| d.join("validation.tsv"));
    cfg.set_path("eval_manifest", from_data.as_deref());
    cfg.set_path("eval_manifest", manifest);
}

pub fn require_eval_manifest(cfg: &RunConfig) -> CliResult<PathBuf> {
    cfg.path("eval_manifest")
        .ok_or_else(|| CliError::config("no evaluation set (pass --data DIR or --manifest FILE)"))
}
