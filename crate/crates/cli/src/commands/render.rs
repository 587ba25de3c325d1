use std::fs;

use sharpfield_core::train::render_image;

use super::{load_checkpoint, out_dir, resolve};
use crate::error::{io_err, CliError};
use crate::spiral::{read_poses, spiral};
use crate::Common;

/// Lossless copies of the frames, kept apart from the PPM previews.
pub const FLOAT_DIR: &str = "float";

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = resolve(c)?;
    let (ck, cams) = load_checkpoint(&cfg)?;
    let poses = match &cfg.poses {
        Some(p) => read_poses(p, &cams[0])?,
        None => spiral(&cams, &cfg.spiral)?,
    };
    let out = out_dir(c)?;
    let float = out.join(FLOAT_DIR);
    fs::create_dir_all(&float).map_err(|e| io_err(&float, e))?;
    for (i, cam) in poses.iter().enumerate() {
        let img = render_image(&ck.model, &ck.config, cam)?;
        img.save_ppm(&out.join(format!("frame_{i:04}.ppm")))?;
        img.save_f32(&float.join(format!("frame_{i:04}.f32")))?;
    }
    println!("rendered {} sharp frames to {}", poses.len(), out.display());
    Ok(())
}
