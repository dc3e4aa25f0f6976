use std::fs;
use std::path::{Path, PathBuf};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Environment variable naming the default root for run directories.
pub const RUNS_ENV: &str = "TEXTSR_RUNS";
pub const DEFAULT_RUNS_ROOT: &str = "runs";

/// `out` as given, or a fresh `<command>-<UTC timestamp>` directory under
/// the configured runs root, `$TEXTSR_RUNS`, or `./runs`.
pub fn create_run_dir(out: Option<&Path>, cfg: &RunConfig, command: &str) -> CliResult<PathBuf> {
    let dir = match out {
        Some(dir) => dir.to_path_buf(),
        None => {
            let root = cfg
                .path("runs_root")
                .or_else(|| std::env::var_os(RUNS_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_RUNS_ROOT));
            let stamp = chrono::Utc::now().format("%Y%m%d-%H%M%S");
            let base = root.join(format!("{command}-{stamp}"));
            let mut dir = base.clone();
            let mut n = 1;
            while dir.exists() {
                n += 1;
                dir = PathBuf::from(format!("{}-{n}", base.display()));
            }
            dir
        }
    };
    fs::create_dir_all(&dir).map_err(|e| CliError::io_at(format!("creating {}", dir.display()), e))?;
    log::info!("run directory {}", dir.display());
    Ok(dir)
}
