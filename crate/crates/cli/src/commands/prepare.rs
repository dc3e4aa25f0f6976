use std::path::{Path, PathBuf};

use clap::ArgGroup;
use textsr::imaging::{generate_synthetic_corpus, split_dataset, DatasetManifest, SynthConfig};

use crate::data::ingest;
use crate::error::{CliError, CliResult};
use crate::Context;

pub const DEFAULT_VALIDATION_COUNT: u64 = 30;
pub const DEFAULT_SYNTHETIC_COUNT: u64 = 100;

/// Generate a synthetic corpus or ingest LR/HR pairs, then split off a validation set.
#[derive(clap::Args, Debug)]
#[command(group(ArgGroup::new("source").args(["synthetic", "ingest"])))]
pub struct Args {
    /// Render random text strips with their bicubic ×2 reductions.
    #[arg(long)]
    synthetic: bool,
    /// Directory holding `hr/<id>.pgm`, `lr/<id>.pgm` and optionally `annotations.tsv`.
    #[arg(long, value_name = "DIR")]
    ingest: Option<PathBuf>,
    /// Number of synthetic pairs [default: 100].
    #[arg(long)]
    count: Option<u64>,
    /// Seed for generation and for the train/validation split [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Pairs held out for validation [default: 30].
    #[arg(long)]
    validation_count: Option<u64>,
}

fn write_manifest(m: &DatasetManifest, path: &Path) -> CliResult<()> {
    Ok(m.write(path)?)
}

pub fn run(args: Args, mut ctx: Context) -> CliResult<()> {
    let cfg = &mut ctx.cfg;
    cfg.set_int("count", args.count)?;
    cfg.set_int("seed", args.seed)?;
    cfg.set_int("validation_count", args.validation_count)?;
    cfg.set_path("ingest_dir", args.ingest.as_deref());
    let seed = cfg.resolve_int("seed", 0)?;
    let validation_count = cfg.resolve_int("validation_count", DEFAULT_VALIDATION_COUNT)? as usize;
    let source = if args.synthetic { None } else { cfg.path("ingest_dir") };
    match &source {
        None if !args.synthetic => return Err(CliError::config("pass --synthetic or --ingest DIR")),
        None => {
            cfg.resolve_int("count", DEFAULT_SYNTHETIC_COUNT)?;
        }
        Some(_) => {}
    }

    let ingested = source.as_deref().map(ingest).transpose()?;
    let dir = ctx.run_dir("prepare")?;
    let manifest = match ingested {
        Some(m) => {
            write_manifest(&m, &dir.join("manifest.tsv"))?;
            m
        }
        None => {
            let synth = SynthConfig {
                count: ctx.cfg.int("count").unwrap_or(DEFAULT_SYNTHETIC_COUNT) as usize,
                seed,
                ..SynthConfig::default()
            };
            generate_synthetic_corpus(&synth, &dir)?
        }
    };
    let (train, validation) = split_dataset(&manifest, validation_count, seed)?;
    write_manifest(&train, &dir.join("train.tsv"))?;
    write_manifest(&validation, &dir.join("validation.tsv"))?;
    ctx.cfg.write_snapshot(&dir)?;
    println!(
        "prepared {} image pairs in {}: {} train, {} validation",
        manifest.len(),
        dir.display(),
        train.len(),
        validation.len()
    );
    Ok(())
}
