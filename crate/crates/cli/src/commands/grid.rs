use std::fs;
use std::io::Write;

use textsr::training::{Grid, GridVariant, CONVERGENCE_CSV_HEADER};

use super::train::{load_training_data, param_summary, parse_spec_arg, resolve_train_config, run_training, TrainFlags};
use crate::error::{CliError, CliResult};
use crate::Context;

pub const GRID_CSV: &str = "grid.csv";
pub const SUMMARY_CSV: &str = "summary.csv";

/// Train every variant of a named experiment grid or of an explicit spec list.
#[derive(clap::Args, Debug)]
pub struct Args {
    /// filter-size, filter-count, depth or init-seeds.
    grid: Option<String>,
    /// Explicit spec to train (repeatable) instead of a named grid.
    #[arg(long = "spec", value_name = "SPEC")]
    specs: Vec<String>,
    /// Runs of the init-seeds grid [default: 3].
    #[arg(long)]
    seeds: Option<u64>,
    /// Print the variants and exit without training.
    #[arg(long)]
    list: bool,
    #[command(flatten)]
    flags: TrainFlags,
}

/// Directory-safe form of a variant label.
pub fn variant_dir_name(label: &str) -> String {
    label
        .chars()
        .filter_map(|c| match c {
            '(' => Some('x'),
            ')' => None,
            c if c.is_ascii_alphanumeric() || c == '-' || c == '.' => Some(c),
            _ => Some('_'),
        })
        .collect()
}

fn variants(args: &Args, ctx: &mut Context) -> CliResult<Vec<GridVariant>> {
    ctx.cfg.set_text("grid", args.grid.as_deref());
    ctx.cfg.set_int("seeds", args.seeds)?;
    let seed = ctx.cfg.resolve_int("seed", 0)?;
    if !args.specs.is_empty() {
        if args.grid.is_some() {
            return Err(CliError::config("give either a grid name or --spec values, not both"));
        }
        return Ok(args
            .specs
            .iter()
            .map(|s| GridVariant { label: s.clone(), spec: s.clone(), seed })
            .collect());
    }
    let name = ctx
        .cfg
        .text("grid")
        .ok_or_else(|| CliError::config("name a grid (filter-size, filter-count, depth, init-seeds) or pass --spec"))?
        .to_string();
    let grid: Grid = name.parse()?;
    let seeds = ctx.cfg.resolve_int("seeds", textsr::training::grids::DEFAULT_INIT_SEED_COUNT as u64)? as usize;
    Ok(grid.variants(seed, seeds))
}

pub fn run(args: Args, mut ctx: Context) -> CliResult<()> {
    args.flags.apply(&mut ctx.cfg)?;
    let variants = variants(&args, &mut ctx)?;
    if args.list {
        for v in &variants {
            println!("{}\t{}\tseed {}", v.label, v.spec, v.seed);
        }
        return Ok(());
    }
    let mut planned = Vec::with_capacity(variants.len());
    for v in &variants {
        let mut cfg = ctx.cfg.clone();
        cfg.set_text("spec", Some(&v.spec));
        cfg.set_int("seed", Some(v.seed))?;
        let tc = resolve_train_config(&mut cfg, parse_spec_arg(&v.spec)?)?;
        planned.push((v, cfg, tc));
    }
    let (train_pairs, validation) = load_training_data(&ctx.cfg)?;
    let dir = ctx.run_dir("grid")?;
    ctx.cfg.write_snapshot(&dir)?;

    let mut merged = format!("variant,spec,seed,{CONVERGENCE_CSV_HEADER}\n");
    let mut summary = String::from("variant,spec,seed,status,final_val_psnr,detail\n");
    let mut first_failure: Option<CliError> = None;
    for (v, cfg, tc) in planned {
        println!("[{}] {}", v.label, param_summary(&tc.spec));
        let vdir = dir.join(variant_dir_name(&v.label));
        fs::create_dir_all(&vdir).map_err(|e| CliError::io_at(format!("creating {}", vdir.display()), e))?;
        cfg.write_snapshot(&vdir)?;
        match run_training(&tc, train_pairs.clone(), &validation, &vdir) {
            Ok(out) => {
                for r in &out.records {
                    let val = r.val_psnr.map_or(String::new(), |p| format!("{p:.6}"));
                    merged.push_str(&format!(
                        "{},{},{},{},{},{:.9e},{}\n",
                        v.label, v.spec, v.seed, r.iteration, r.backprops, r.train_mse, val
                    ));
                }
                let last = out.records.last().and_then(|r| r.val_psnr);
                let last_text = last.map_or(String::new(), |p| format!("{p:.4}"));
                summary.push_str(&format!("{},{},{},ok,{last_text},\n", v.label, v.spec, v.seed));
                println!("[{}] done{}", v.label, last.map_or(String::new(), |p| format!(", {p:.3} dB")));
            }
            Err(e) => {
                log::error!("[{}] failed: {e}", v.label);
                let detail = e.message.replace([',', '\n'], ";");
                summary.push_str(&format!("{},{},{},failed,,{detail}\n", v.label, v.spec, v.seed));
                println!("[{}] FAILED: {e}", v.label);
                first_failure.get_or_insert(e);
            }
        }
    }
    for (name, body) in [(GRID_CSV, &merged), (SUMMARY_CSV, &summary)] {
        let path = dir.join(name);
        fs::File::create(&path)
            .and_then(|mut f| f.write_all(body.as_bytes()))
            .map_err(|e| CliError::io_at(format!("writing {}", path.display()), e))?;
    }
    println!("grid results in {}", dir.display());
    first_failure.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dir_names() {
        assert_eq!(variant_dir_name("64(9)-32(7)-1(5)"), "64x9-32x7-1x5");
        assert_eq!(variant_dir_name("64(9)-32(7)-16(5)-1(5)#seed2"), "64x9-32x7-16x5-1x5_seed2");
    }
}
