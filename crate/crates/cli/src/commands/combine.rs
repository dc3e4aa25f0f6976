use std::fs;
use std::path::{Path, PathBuf};

use textsr::ensemble::{greedy_search, ModelPool, PsnrScorer, ScoredCombination, Scorer, DEFAULT_ROUNDS};
use textsr::metrics::BorderMode;

use super::{apply_eval_manifest, external_scorer, require_eval_manifest, OcrFlags};
use crate::config::absolute;
use crate::data::{eval_items, expand_inputs, load_network, read_manifest, write_combination};
use crate::error::{CliError, CliResult};
use crate::Context;

pub const ROUNDS_CSV: &str = "rounds.csv";
pub const PARTIAL_ROUNDS_CSV: &str = "rounds.partial.csv";
pub const BEST_COMBINATION: &str = "best.combination";

/// Greedy search for the best averaged combination of trained networks.
#[derive(clap::Args, Debug)]
pub struct Args {
    /// Checkpoints, or directories whose `*.ckpt` files join the pool.
    checkpoints: Vec<PathBuf>,
    /// Prepared dataset directory; its validation.tsv is the evaluation set.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Evaluation manifest (overrides --data).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// psnr or external [default: psnr].
    #[arg(long)]
    scorer: Option<String>,
    /// Rounds of the search [default: 14].
    #[arg(long)]
    max_rounds: Option<u64>,
    /// Border handling for the PSNR scorer, keep or trim4 [default: keep].
    #[arg(long)]
    border: Option<String>,
    #[command(flatten)]
    ocr: OcrFlags,
}

fn rounds_csv(rounds: &[ScoredCombination]) -> String {
    let mut csv = String::from("round,score,scorer,members\n");
    for (k, r) in rounds.iter().enumerate() {
        csv.push_str(&format!("{},{:.6},{},{}\n", k + 1, r.score, r.scorer_name, r.combination.members().join(";")));
    }
    csv
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io_at(format!("writing {}", path.display()), e))
}

pub fn run(args: Args, mut ctx: Context) -> CliResult<()> {
    let cfg = &mut ctx.cfg;
    apply_eval_manifest(cfg, args.data.as_deref(), args.manifest.as_deref());
    cfg.set_text("scorer", args.scorer.as_deref());
    cfg.set_int("max_rounds", args.max_rounds)?;
    cfg.set_text("border", args.border.as_deref());
    args.ocr.apply(cfg)?;
    let max_rounds = cfg.resolve_int("max_rounds", DEFAULT_ROUNDS as u64)? as usize;
    if max_rounds == 0 {
        return Err(CliError::config("max_rounds must be at least 1"));
    }
    let scorer_kind = cfg.resolve_parsed::<String>("scorer", "psnr")?;
    let border = cfg.resolve_parsed::<BorderMode>("border", BorderMode::Keep.label())?;
    if scorer_kind != "psnr" && scorer_kind != "external" {
        return Err(CliError::config(format!("unknown scorer `{scorer_kind}` (expected psnr or external)")));
    }
    if scorer_kind == "external" && cfg.text("ocr_cmd").is_none() {
        return Err(CliError::config("the external scorer needs --ocr-cmd"));
    }
    let checkpoints = expand_inputs(&args.checkpoints, "ckpt")?;
    if checkpoints.is_empty() {
        return Err(CliError::config("the model pool is empty (no checkpoints given)"));
    }
    let manifest_path = require_eval_manifest(cfg)?;
    let items = eval_items(&read_manifest(&manifest_path)?)?;

    let dir = ctx.run_dir("combine")?;
    let scorer: Box<dyn Scorer> = match scorer_kind.as_str() {
        "external" => Box::new(external_scorer(&mut ctx.cfg, &dir.join("ocr"))?.expect("command checked above")),
        _ => Box::new(PsnrScorer { border }),
    };
    ctx.cfg.write_snapshot(&dir)?;

    let mut pool = ModelPool::new(items)?;
    for path in &checkpoints {
        let id = absolute(path).display().to_string();
        log::info!("scoring outputs of {id}");
        pool.add_network(id, &load_network(path)?)?;
    }
    let outcome = match greedy_search(&pool, scorer.as_ref(), max_rounds) {
        Ok(o) => o,
        Err(aborted) => {
            write_text(&dir.join(PARTIAL_ROUNDS_CSV), &rounds_csv(&aborted.completed))?;
            return Err(CliError::from(aborted.source));
        }
    };
    write_text(&dir.join(ROUNDS_CSV), &rounds_csv(&outcome.rounds))?;
    for (k, r) in outcome.rounds.iter().enumerate() {
        write_combination(&dir.join(format!("round_{:02}.combination", k + 1)), r.combination.members())?;
    }
    let best = outcome.best();
    write_combination(&dir.join(BEST_COMBINATION), best.combination.members())?;
    for (k, r) in outcome.rounds.iter().enumerate() {
        println!("round {:2}: {} {:.4} with {} members", k + 1, r.scorer_name, r.score, r.combination.len());
    }
    println!(
        "best: round {} ({} {:.4}); combination written to {}",
        outcome.best_round + 1,
        best.scorer_name,
        best.score,
        dir.join(BEST_COMBINATION).display()
    );
    Ok(())
}
