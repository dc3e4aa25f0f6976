use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use textsr::ensemble::{character_accuracy, ExternalScorer, FailurePolicy};
use textsr::imaging::{load_pgm, save_pgm, GrayImage};
use textsr::metrics::{evaluate_set, BorderMode, SetReport};
use textsr::Tensor;

use super::{apply_eval_manifest, external_scorer, require_eval_manifest, OcrFlags};
use crate::data::{id_mismatch, image_pairs, pgm_files, read_manifest};
use crate::error::{CliError, CliResult};
use crate::Context;

pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.txt";

/// Per-image and mean PSNR, RMSE and MSSIM of SR outputs against HR references.
#[derive(clap::Args, Debug)]
pub struct Args {
    /// Directory of super-resolved images named `<id>.pgm`.
    #[arg(long, value_name = "DIR")]
    sr: Option<PathBuf>,
    /// Prepared dataset directory; its validation.tsv names the references.
    #[arg(long, value_name = "DIR")]
    data: Option<PathBuf>,
    /// Reference manifest (overrides --data).
    #[arg(long, value_name = "FILE")]
    manifest: Option<PathBuf>,
    /// Add a `bicubic` row scoring the plain ×2 upscaling of each LR image.
    #[arg(long)]
    baseline: bool,
    /// keep or trim4 [default: keep].
    #[arg(long)]
    border: Option<String>,
    #[command(flatten)]
    ocr: OcrFlags,
}

/// Both images cropped to their common top-left region.
fn aligned(a: &GrayImage, b: &GrayImage) -> CliResult<(Tensor, Tensor)> {
    let h = a.height().min(b.height());
    let w = a.width().min(b.width());
    Ok((a.crop_to(h, w)?.to_tensor(), b.crop_to(h, w)?.to_tensor()))
}

/// Character accuracy of one image file, or `None` when the call failed and the policy skips.
fn ocr_accuracy(scorer: &ExternalScorer, path: &Path, id: &str, truth: Option<&str>) -> CliResult<Option<f64>> {
    let Some(truth) = truth else {
        log::warn!("`{id}` has no annotation; OCR accuracy left blank");
        return Ok(None);
    };
    match scorer.recognize(path) {
        Ok(text) => Ok(Some(character_accuracy(&text, truth))),
        Err(reason) if scorer.policy == FailurePolicy::Skip => {
            log::warn!("recognition failed on `{id}`: {reason}; skipped");
            Ok(None)
        }
        Err(reason) => Err(CliError::io(format!("recognition failed on `{id}`: {reason}"))),
    }
}

fn mean_of(values: &[Option<f64>]) -> Option<f64> {
    let got: Vec<f64> = values.iter().flatten().copied().collect();
    (!got.is_empty()).then(|| got.iter().sum::<f64>() / got.len() as f64)
}

fn cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.6}"))
}

fn summary_row(report: &SetReport, label: &str, ocr: Option<Option<f64>>) -> String {
    let mut row = Vec::new();
    report.write_summary_row(&mut row, label).expect("writing to memory");
    let mut row = String::from_utf8(row).expect("ascii row");
    if let Some(v) = ocr {
        row.insert_str(row.len() - 1, &format!(",{}", cell(v)));
    }
    row
}

pub fn run(args: Args, mut ctx: Context) -> CliResult<()> {
    let cfg = &mut ctx.cfg;
    apply_eval_manifest(cfg, args.data.as_deref(), args.manifest.as_deref());
    cfg.set_path("sr_dir", args.sr.as_deref());
    cfg.set_text("border", args.border.as_deref());
    args.ocr.apply(cfg)?;
    let border = cfg.resolve_parsed::<BorderMode>("border", BorderMode::Keep.label())?;
    let sr_dir = cfg.require_path("sr_dir", "pass --sr DIR")?;
    let manifest = read_manifest(&require_eval_manifest(cfg)?)?;

    let sr_files = pgm_files(&sr_dir)?;
    let expected: BTreeSet<&str> = manifest.entries().iter().map(|e| e.id.as_str()).collect();
    let found: BTreeSet<&str> = sr_files.keys().map(String::as_str).collect();
    if let Some(msg) = id_mismatch(&expected, &found) {
        return Err(CliError::io(format!("{} does not match the references: {msg}", sr_dir.display())));
    }

    let dir = ctx.run_dir("evaluate")?;
    let scorer = external_scorer(&mut ctx.cfg, &dir.join("ocr"))?;
    ctx.cfg.write_snapshot(&dir)?;

    let pairs = image_pairs(&manifest)?;
    let mut sr_tensors = Vec::with_capacity(pairs.len());
    let mut hr_tensors = Vec::with_capacity(pairs.len());
    for entry in manifest.entries() {
        let (sr, hr) = aligned(&load_pgm(&sr_files[&entry.id])?, &manifest.load_hr(entry)?)?;
        sr_tensors.push(sr);
        hr_tensors.push(hr);
    }
    let ids: Vec<&str> = manifest.entries().iter().map(|e| e.id.as_str()).collect();
    let report = evaluate_set(ids.iter().zip(&sr_tensors).zip(&hr_tensors).map(|((i, s), h)| (*i, s, h)), border)?;
    let baseline = if args.baseline {
        Some(evaluate_set(pairs.iter().map(|p| (p.id.as_str(), &p.lr_upscaled, &p.hr)), border)?)
    } else {
        None
    };

    let mut ocr_sr: Vec<Option<f64>> = Vec::new();
    let mut ocr_baseline: Vec<Option<f64>> = Vec::new();
    if let Some(s) = &scorer {
        fs::create_dir_all(&s.work_dir).map_err(|e| CliError::io_at(format!("creating {}", s.work_dir.display()), e))?;
        for (entry, pair) in manifest.entries().iter().zip(&pairs) {
            let truth = entry.annotation.as_deref();
            ocr_sr.push(ocr_accuracy(s, &sr_files[&entry.id], &entry.id, truth)?);
            if baseline.is_some() {
                let path = s.work_dir.join(format!("bicubic_{}.pgm", entry.id));
                save_pgm(&GrayImage::from_tensor(&pair.lr_upscaled), &path)?;
                ocr_baseline.push(ocr_accuracy(s, &path, &entry.id, truth)?);
            }
        }
    }

    let with_ocr = scorer.is_some();
    let mut csv = String::from("image_id,psnr,rmse,mssim");
    if with_ocr {
        csv.push_str(",ocr_accuracy");
    }
    csv.push('\n');
    for (k, r) in report.images.iter().enumerate() {
        match &r.result {
            Ok(m) => write!(csv, "{},{},{:.6},{:.6}", r.id, m.psnr, m.rmse, m.mssim).expect("writing to memory"),
            Err(e) => {
                log::warn!("`{}` not evaluated: {e}", r.id);
                write!(csv, "{},,,", r.id).expect("writing to memory")
            }
        }
        if with_ocr {
            csv.push(',');
            csv.push_str(&cell(ocr_sr[k]));
        }
        csv.push('\n');
    }
    csv.push_str(&summary_row(&report, "mean", with_ocr.then(|| mean_of(&ocr_sr))));
    if let Some(b) = &baseline {
        csv.push_str(&summary_row(b, "bicubic", with_ocr.then(|| mean_of(&ocr_baseline))));
    }
    let report_path = dir.join(REPORT_CSV);
    fs::write(&report_path, &csv).map_err(|e| CliError::io_at(format!("writing {}", report_path.display()), e))?;

    let a = &report.aggregate;
    let mut summary = format!(
        "images: {}\nborder: {}\nmean psnr: {}\nmean rmse: {:.6}\nmean mssim: {:.6}\n",
        a.evaluated,
        border.label(),
        a.psnr.map_or("inf".to_string(), |p| format!("{p:.4} dB")),
        a.rmse,
        a.mssim
    );
    if a.identical_excluded > 0 {
        writeln!(summary, "identical pairs excluded from mean psnr: {}", a.identical_excluded).expect("writing to memory");
    }
    if let Some(b) = &baseline {
        let p = b.aggregate.psnr.map_or("inf".to_string(), |p| format!("{p:.4} dB"));
        writeln!(summary, "bicubic mean psnr: {p}").expect("writing to memory");
    }
    if with_ocr {
        writeln!(summary, "mean ocr accuracy: {}", cell(mean_of(&ocr_sr))).expect("writing to memory");
    }
    let summary_path = dir.join(SUMMARY_FILE);
    fs::write(&summary_path, &summary).map_err(|e| CliError::io_at(format!("writing {}", summary_path.display()), e))?;
    print!("{summary}");
    println!("report written to {}", report_path.display());
    Ok(())
}
