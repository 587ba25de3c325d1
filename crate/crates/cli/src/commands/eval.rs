use std::fmt::Write as _;
use std::fs;

use sharpfield_core::harness::{error_map, psnr, ssim, Access, Dataset, Image};
use sharpfield_core::train::{render_image, KernelMode};

use super::{dataset_dir, fmt_db, load_checkpoint, out_dir, resolve, write};
use crate::error::{io_err, CliError};
use crate::{Baseline, Common};

pub const REPORT_FILE: &str = "metrics.csv";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Row {
    pub psnr: f64,
    pub ssim: f64,
}

/// Per-pair PSNR and SSIM of `renders` against `truth`.
pub fn score(renders: &[Image], truth: &[Image]) -> Result<Vec<Row>, CliError> {
    if renders.len() != truth.len() {
        return Err(CliError::Internal(format!(
            "{} renders for {} views",
            renders.len(),
            truth.len()
        )));
    }
    renders
        .iter()
        .zip(truth)
        .map(|(r, t)| {
            Ok(Row {
                psnr: psnr(r, t)?,
                ssim: ssim(r, t)?,
            })
        })
        .collect()
}

/// Arithmetic means; any infinite PSNR makes the mean infinite.
pub fn mean(rows: &[Row]) -> Row {
    let n = rows.len() as f64;
    Row {
        psnr: rows.iter().map(|r| r.psnr).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
    }
}

/// CSV with one row per view and a final `mean` row.
pub fn report(rows: &[Row]) -> String {
    let mut s = String::from("view,psnr,ssim\n");
    for (i, r) in rows.iter().enumerate() {
        writeln!(s, "{i},{},{:.6}", fmt_db(r.psnr), r.ssim).unwrap();
    }
    let m = mean(rows);
    writeln!(s, "mean,{},{:.6}", fmt_db(m.psnr), m.ssim).unwrap();
    s
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = resolve(c)?;
    let (ck, _) = load_checkpoint(&cfg)?;
    if c.baseline == Some(Baseline::Naive) && ck.config.kernel != KernelMode::Disabled {
        return Err(CliError::User(format!(
            "--baseline naive expects a checkpoint trained with --disable-kernel, this one used kernel = {}",
            ck.config.kernel.as_str()
        )));
    }
    let ds = Dataset::open(dataset_dir(&cfg)?, Access::Blind)?;
    if !ds.has_ground_truth() {
        return Err(CliError::User(
            "dataset has no sharp ground truth to evaluate against".into(),
        ));
    }
    let truth: Vec<Image> = ds
        .views
        .iter()
        .map(|v| v.sharp.clone().expect("checked above"))
        .collect();
    let renders = ds
        .views
        .iter()
        .map(|v| render_image(&ck.model, &ck.config, &v.camera))
        .collect::<Result<Vec<_>, _>>()?;
    let rows = score(&renders, &truth)?;

    let out = out_dir(c)?;
    let (rdir, edir) = (out.join("renders"), out.join("errors"));
    for d in [&rdir, &edir] {
        fs::create_dir_all(d).map_err(|e| io_err(d, e))?;
    }
    for (i, (r, t)) in renders.iter().zip(&truth).enumerate() {
        r.save_ppm(&rdir.join(format!("render_{i:04}.ppm")))?;
        r.save_f32(&rdir.join(format!("render_{i:04}.f32")))?;
        error_map(r, t)?
            .to_image()
            .save_ppm(&edir.join(format!("error_{i:04}.ppm")))?;
    }
    let text = report(&rows);
    write(&out.join(REPORT_FILE), &text)?;
    let model = match c.baseline {
        Some(Baseline::Naive) => "naive baseline",
        None => "model",
    };
    let m = mean(&rows);
    println!(
        "{model}: mean psnr {} dB, mean ssim {:.4} over {} views",
        fmt_db(m.psnr),
        m.ssim,
        rows.len()
    );
    Ok(())
}
