use sharpfield_core::harness::{export_dataset, synthesize, BlurKind};

use super::{fmt_db, out_dir, resolve};
use crate::error::CliError;
use crate::Common;

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = resolve(c)?;
    let scene = cfg.scene()?;
    let out = out_dir(c)?;
    let s = synthesize(&scene, &cfg.synth)?;
    export_dataset(out, &s.views, &s.blur)?;
    let kind = match cfg.synth.blur {
        BlurKind::Motion => "motion",
        BlurKind::Defocus => "defocus",
    };
    println!(
        "wrote {} {kind}-blurred views to {}",
        s.views.len(),
        out.display()
    );
    for (i, (v, p)) in s.views.iter().zip(s.blur_psnr()).enumerate() {
        let sharp = v.sharp.as_ref().expect("synthesized views are sharp");
        let n = v.blurred.data().len() as f64;
        let mad: f64 = v
            .blurred
            .data()
            .iter()
            .zip(sharp.data())
            .map(|(a, b)| f64::from((a - b).abs()))
            .sum::<f64>()
            / n;
        println!(
            "view {i:4}: blurred vs sharp psnr {} dB, mean abs diff {mad:.5}",
            fmt_db(p)
        );
    }
    Ok(())
}
