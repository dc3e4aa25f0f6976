use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use textsr::metrics::BorderMode;
use textsr::network::{format_spec, save_checkpoint, Checkpoint, DEFAULT_WEIGHT_STD};
use textsr::training::{
    train, write_convergence_csv, ImagePair, TrainConfig, TrainOutcome, WindowedImages, DEFAULT_BATCH_SIZE,
    DEFAULT_LR_LAST, DEFAULT_LR_OTHER,
};
use textsr::{parse_spec, Error, NetworkSpec};

use crate::config::RunConfig;
use crate::data::{image_pairs, read_manifest};
use crate::error::{CliError, CliResult, EXIT_DIVERGED};
use crate::Context;

pub const DEFAULT_MAX_ITERATIONS: u64 = 5000;
pub const DEFAULT_CHECKPOINT_EVERY: u64 = 1000;
pub const DEFAULT_EVAL_EVERY: u64 = 100;
pub const MODEL_FILE: &str = "model.ckpt";
pub const CONVERGENCE_FILE: &str = "convergence.csv";

/// Training data and hyperparameters shared by `train` and `grid`.
#[derive(clap::Args, Debug, Default)]
pub struct TrainFlags {
    /// Prepared dataset directory holding train.tsv and validation.tsv.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Training manifest (overrides --data).
    #[arg(long, value_name = "FILE")]
    train_manifest: Option<PathBuf>,
    /// Validation manifest (overrides --data).
    #[arg(long, value_name = "FILE")]
    validation_manifest: Option<PathBuf>,
    /// Seed for weight initialization and batch sampling [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Learning rate of the last layer [default: 1e-5].
    #[arg(long)]
    lr_last: Option<f64>,
    /// Learning rate of every other layer [default: 1e-4].
    #[arg(long)]
    lr_other: Option<f64>,
    /// Momentum coefficient; 0 is plain SGD [default: 0].
    #[arg(long)]
    momentum: Option<f64>,
    /// Standard deviation of the Gaussian weight initialization [default: 0.001].
    #[arg(long)]
    weight_std: Option<f64>,
    /// Sub-images per mini-batch [default: 128].
    #[arg(long)]
    batch_size: Option<u64>,
    /// Mini-batch iterations [default: 5000].
    #[arg(long)]
    max_iterations: Option<u64>,
    /// Iterations between checkpoints; 0 disables them [default: 1000].
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Iterations between convergence records; 0 disables them [default: 100].
    #[arg(long)]
    eval_every: Option<u64>,
    /// Border handling for validation PSNR, keep or trim4 [default: trim4].
    #[arg(long)]
    eval_border: Option<String>,
}

impl TrainFlags {
    pub fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        if let Some(d) = &self.data {
            cfg.set_path("train_manifest", Some(&d.join("train.tsv")));
            cfg.set_path("validation_manifest", Some(&d.join("validation.tsv")));
        }
        cfg.set_path("train_manifest", self.train_manifest.as_deref());
        cfg.set_path("validation_manifest", self.validation_manifest.as_deref());
        cfg.set_int("seed", self.seed)?;
        cfg.set_float("lr_last", self.lr_last);
        cfg.set_float("lr_other", self.lr_other);
        cfg.set_float("momentum", self.momentum);
        cfg.set_float("weight_std", self.weight_std);
        cfg.set_int("batch_size", self.batch_size)?;
        cfg.set_int("max_iterations", self.max_iterations)?;
        cfg.set_int("checkpoint_every", self.checkpoint_every)?;
        cfg.set_int("eval_every", self.eval_every)?;
        cfg.set_text("eval_border", self.eval_border.as_deref());
        Ok(())
    }
}

/// Fills in every training key (recording defaults) and builds a validated config.
pub fn resolve_train_config(cfg: &mut RunConfig, spec: NetworkSpec) -> CliResult<TrainConfig> {
    let mut tc = TrainConfig::new(spec);
    tc.seed = cfg.resolve_int("seed", 0)?;
    tc.lr_last = cfg.resolve_float("lr_last", DEFAULT_LR_LAST);
    tc.lr_other = cfg.resolve_float("lr_other", DEFAULT_LR_OTHER);
    tc.momentum = cfg.resolve_float("momentum", 0.0);
    tc.weight_std = cfg.resolve_float("weight_std", DEFAULT_WEIGHT_STD);
    tc.batch_size = cfg.resolve_int("batch_size", DEFAULT_BATCH_SIZE as u64)? as usize;
    tc.max_iterations = cfg.resolve_int("max_iterations", DEFAULT_MAX_ITERATIONS)?;
    tc.checkpoint_every = cfg.resolve_int("checkpoint_every", DEFAULT_CHECKPOINT_EVERY)?;
    tc.eval_every = cfg.resolve_int("eval_every", DEFAULT_EVAL_EVERY)?;
    tc.eval_border = cfg.resolve_parsed::<BorderMode>("eval_border", BorderMode::Trim.label())?;
    tc.validate()?;
    Ok(tc)
}

pub fn parse_spec_arg(text: &str) -> CliResult<NetworkSpec> {
    parse_spec(text).map_err(|e| CliError::config(format!("spec `{text}`: {e}")))
}

/// Training and validation pairs named by the config.
pub fn load_training_data(cfg: &RunConfig) -> CliResult<(Vec<ImagePair>, Vec<ImagePair>)> {
    let train_path = cfg.require_path("train_manifest", "pass --data DIR or --train-manifest FILE")?;
    let train = image_pairs(&read_manifest(&train_path)?)?;
    let validation = match cfg.path("validation_manifest") {
        Some(p) => image_pairs(&read_manifest(&p)?)?,
        None => Vec::new(),
    };
    Ok((train, validation))
}

/// `106336` as `106,336`.
pub fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(c);
    }
    out
}

pub fn param_summary(spec: &NetworkSpec) -> String {
    format!(
        "network {}: {} weights ({} parameters with biases)",
        format_spec(spec),
        group_thousands(spec.param_count(false)),
        group_thousands(spec.param_count(true))
    )
}

fn latest_checkpoint(dir: &Path) -> Option<PathBuf> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .ok()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "ckpt"))
        .collect();
    files.sort();
    files.pop()
}

/// Trains into `dir`: periodic checkpoints under `checkpoints/`, the final
/// network as `model.ckpt` and the convergence CSV.
pub fn run_training(tc: &TrainConfig, train_pairs: Vec<ImagePair>, validation: &[ImagePair], dir: &Path) -> CliResult<TrainOutcome> {
    let ckpt_dir = dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| CliError::io_at(format!("creating {}", ckpt_dir.display()), e))?;
    let source = WindowedImages::new(train_pairs, &tc.spec)?;
    let outcome = match train(tc, &source, validation, Some(&ckpt_dir)) {
        Ok(o) => o,
        Err(e @ Error::Divergence { .. }) => {
            let kept = latest_checkpoint(&ckpt_dir)
                .map_or("none was written yet".to_string(), |p| p.display().to_string());
            return Err(CliError { code: EXIT_DIVERGED, message: format!("{e}; last good checkpoint: {kept}") });
        }
        Err(e) => return Err(e.into()),
    };
    save_checkpoint(&Checkpoint::new(outcome.network.clone(), tc.max_iterations), &dir.join(MODEL_FILE))?;
    let csv_path = dir.join(CONVERGENCE_FILE);
    let file = fs::File::create(&csv_path).map_err(|e| CliError::io_at(format!("creating {}", csv_path.display()), e))?;
    write_convergence_csv(&outcome.records, &mut BufWriter::new(file))
        .map_err(|e| CliError::io_at(format!("writing {}", csv_path.display()), e))?;
    Ok(outcome)
}

/// Train one network.
#[derive(clap::Args, Debug)]
pub struct Args {
    /// Network spec such as `64(9)-32(7)-1(5)`.
    #[arg(long)]
    spec: Option<String>,
    #[command(flatten)]
    flags: TrainFlags,
}

pub fn run(args: Args, mut ctx: Context) -> CliResult<()> {
    ctx.cfg.set_text("spec", args.spec.as_deref());
    args.flags.apply(&mut ctx.cfg)?;
    let spec_text = ctx
        .cfg
        .text("spec")
        .ok_or_else(|| CliError::config("no network spec (pass --spec or set `spec`)"))?
        .to_string();
    let spec = parse_spec_arg(&spec_text)?;
    let tc = resolve_train_config(&mut ctx.cfg, spec)?;
    println!("{}", param_summary(&tc.spec));
    let (train_pairs, validation) = load_training_data(&ctx.cfg)?;
    let dir = ctx.run_dir("train")?;
    ctx.cfg.write_snapshot(&dir)?;
    let outcome = run_training(&tc, train_pairs, &validation, &dir)?;
    if let Some(psnr) = outcome.records.last().and_then(|r| r.val_psnr) {
        println!("validation PSNR after {} iterations: {psnr:.3} dB ({})", tc.max_iterations, tc.eval_border.label());
    }
    println!("model written to {}", dir.join(MODEL_FILE).display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thousands() {
        assert_eq!(group_thousands(0), "0");
        assert_eq!(group_thousands(999), "999");
        assert_eq!(group_thousands(106_336), "106,336");
        assert_eq!(group_thousands(1_234_567), "1,234,567");
    }

    #[test]
    fn published_defaults_when_unset() {
        let mut cfg = RunConfig::default();
        let tc = resolve_train_config(&mut cfg, parse_spec("64(9)-32(7)-1(5)").unwrap()).unwrap();
        assert_eq!((tc.lr_last, tc.lr_other, tc.weight_std), (1e-5, 1e-4, 0.001));
        assert_eq!(tc.batch_size, 128);
        assert_eq!(cfg.float("lr_last"), Some(1e-5));
        assert!(param_summary(&tc.spec).contains("106,336 weights"));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.set_float("momentum", Some(1.5));
        let err = resolve_train_config(&mut cfg, parse_spec("8(5)-4(3)-1(3)").unwrap()).unwrap_err();
        assert_eq!(err.code, crate::error::EXIT_CONFIG);
        assert_eq!(parse_spec_arg("64(9)-32(8)-1(5)").unwrap_err().code, crate::error::EXIT_CONFIG);
    }
}
