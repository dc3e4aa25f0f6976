use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::ArgGroup;
use textsr::ensemble::average_outputs;
use textsr::imaging::{bicubic_upscale_x2, load_pgm, save_pgm, GrayImage};
use textsr::network::format_spec;
use textsr::Tensor;

use super::train::parse_spec_arg;
use crate::data::{expand_inputs, load_members, read_combination};
use crate::error::{CliError, CliResult};
use crate::Context;

/// Super-resolve LR images ×2 with one checkpoint or an averaged combination.
#[derive(clap::Args, Debug)]
#[command(group(ArgGroup::new("model").args(["checkpoint", "combination"])))]
pub struct Args {
    /// Trained checkpoint.
    #[arg(long, value_name = "FILE")]
    checkpoint: Option<PathBuf>,
    /// Combination file listing one checkpoint path per line.
    #[arg(long, value_name = "FILE")]
    combination: Option<PathBuf>,
    /// Reject checkpoints whose network differs from this spec.
    #[arg(long)]
    spec: Option<String>,
    /// LR PGM files, or directories of them.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
}

pub fn run(args: Args, mut ctx: Context) -> CliResult<()> {
    let cfg = &mut ctx.cfg;
    cfg.set_path("checkpoint", args.checkpoint.as_deref());
    cfg.set_path("combination", args.combination.as_deref());
    cfg.set_text("spec", args.spec.as_deref());
    let combination = if args.checkpoint.is_some() { None } else { cfg.path("combination") };
    let members = match (combination, cfg.path("checkpoint")) {
        (Some(c), _) => read_combination(&c)?,
        (None, Some(p)) => vec![p],
        (None, None) => return Err(CliError::config("pass --checkpoint FILE or --combination FILE")),
    };
    let (nets, order) = load_members(&members)?;
    if let Some(text) = cfg.text("spec") {
        let expected = parse_spec_arg(text)?;
        for (path, &i) in members.iter().zip(&order) {
            let net = &nets[i];
            if net.spec() != &expected {
                return Err(CliError::config(format!(
                    "{} holds a {} network, expected {}",
                    path.display(),
                    format_spec(net.spec()),
                    format_spec(&expected)
                )));
            }
        }
    }

    let files = expand_inputs(&args.inputs, "pgm")?;
    let mut outputs: BTreeMap<String, PathBuf> = BTreeMap::new();
    for f in &files {
        let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        if let Some(prev) = outputs.insert(stem.clone(), f.clone()) {
            return Err(CliError::config(format!(
                "{} and {} would both be written as {stem}.pgm",
                prev.display(),
                f.display()
            )));
        }
    }
    if files.is_empty() {
        return Err(CliError::config("no input images"));
    }

    let dir = ctx.run_dir("infer")?;
    ctx.cfg.write_snapshot(&dir)?;
    for (stem, input) in &outputs {
        let up = bicubic_upscale_x2(&load_pgm(input)?).to_tensor();
        let per_net: Vec<Tensor> = nets.iter().map(|n| n.predict_image(&up)).collect::<Result<_, _>>()?;
        let refs: Vec<&Tensor> = order.iter().map(|&i| &per_net[i]).collect();
        let sr = average_outputs(&refs)?;
        save_pgm(&GrayImage::from_tensor(&sr), &dir.join(format!("{stem}.pgm")))?;
    }
    println!(
        "super-resolved {} images with {} model(s) into {}",
        outputs.len(),
        order.len(),
        dir.display()
    );
    Ok(())
}
