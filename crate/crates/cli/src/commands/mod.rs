use std::fs;
use std::path::{Path, PathBuf};

use sharpfield_core::harness::{read_cameras, Camera};
use sharpfield_core::train::{Checkpoint, KernelMode};

use crate::config::RunConfig;
use crate::error::{io_err, CliError};
use crate::Common;

pub mod eval;
pub mod inspect;
pub mod render;
pub mod synth;
pub mod train;

/// Intrinsics and poses of the training views, stored next to the weights.
pub const CAMERAS_FILE: &str = "cameras.txt";

/// Config file (or defaults) with the command-line overrides applied.
pub fn resolve(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.train.seed = seed;
        cfg.synth.seed = seed;
    }
    if let Some(n) = c.iters {
        cfg.train.total_iters = n;
    }
    if c.disable_awp {
        cfg.train.awp = false;
    }
    if c.disable_kernel {
        cfg.train.kernel = KernelMode::Disabled;
    }
    if let Some(d) = &c.dataset {
        cfg.dataset = Some(d.clone());
    }
    if let Some(d) = &c.checkpoint {
        cfg.checkpoint = Some(d.clone());
    }
    Ok(cfg)
}

pub fn out_dir(c: &Common) -> Result<&Path, CliError> {
    fs::create_dir_all(&c.out).map_err(|e| io_err(&c.out, e))?;
    Ok(&c.out)
}

pub fn dataset_dir(cfg: &RunConfig) -> Result<&PathBuf, CliError> {
    cfg.dataset.as_ref().ok_or_else(|| {
        CliError::User("no dataset: pass --dataset or set `dataset` in the config".into())
    })
}

pub fn load_checkpoint(cfg: &RunConfig) -> Result<(Checkpoint, Vec<Camera>), CliError> {
    let dir = cfg.checkpoint.as_ref().ok_or_else(|| {
        CliError::User("no checkpoint: pass --checkpoint or set `checkpoint` in the config".into())
    })?;
    if !dir.is_dir() {
        return Err(CliError::User(format!(
            "checkpoint {} is not a directory",
            dir.display()
        )));
    }
    let ck = Checkpoint::load(dir)?;
    let cams = read_cameras(&dir.join(CAMERAS_FILE))?;
    if cams.len() != ck.model.rbk.n_images {
        return Err(CliError::User(format!(
            "{} lists {} cameras but the checkpoint has {} images",
            CAMERAS_FILE,
            cams.len(),
            ck.model.rbk.n_images
        )));
    }
    Ok((ck, cams))
}

pub fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `inf` for identical images, otherwise fixed decimals.
pub fn fmt_db(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:.4}")
    }
}
