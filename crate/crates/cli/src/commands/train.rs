use std::fs::File;
use std::io::{BufWriter, Write};

use sharpfield_core::harness::{write_cameras, Access, Camera, Dataset};
use sharpfield_core::train::{TrainView, Trainer, LOG_HEADER};
use sharpfield_core::Error;

use super::{dataset_dir, out_dir, resolve, write, CAMERAS_FILE};
use crate::error::{io_err, CliError};
use crate::Common;

pub const LOG_FILE: &str = "log.csv";
pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const NAN_DUMP: &str = "nan_dump.txt";

const PROGRESS_EVERY: usize = 1000;

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = resolve(c)?;
    let data = dataset_dir(&cfg)?;
    let out = out_dir(c)?;
    let ds = Dataset::open(data, Access::Blind)?;
    let views: Vec<TrainView> = ds
        .views
        .into_iter()
        .map(|v| TrainView {
            camera: v.camera,
            image: v.blurred,
        })
        .collect();
    let cams: Vec<Camera> = views.iter().map(|v| v.camera).collect();
    let mut trainer = Trainer::new(cfg.train.clone(), views)?;

    let log_path = out.join(LOG_FILE);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| io_err(&log_path, e))?);
    let w =
        |log: &mut BufWriter<File>, s: &str| writeln!(log, "{s}").map_err(|e| io_err(&log_path, e));
    w(&mut log, LOG_HEADER)?;
    let every = trainer.config.checkpoint_every;
    let total = trainer.config.total_iters;
    while trainer.iteration < total {
        let rec = match trainer.step() {
            Ok(r) => r,
            Err(Error::NonFinite(msg)) => {
                log.flush().map_err(|e| io_err(&log_path, e))?;
                write(&out.join(NAN_DUMP), &format!("{msg}\n"))?;
                return Err(CliError::Numeric(format!("training diverged: {msg}")));
            }
            Err(e) => return Err(e.into()),
        };
        w(&mut log, &rec.csv())?;
        if trainer.iteration % PROGRESS_EVERY == 0 {
            println!(
                "iteration {}/{total}: loss {:.6} lambda {:.4}",
                trainer.iteration, rec.loss, rec.lambda
            );
        }
        if every > 0 && trainer.iteration % every == 0 && trainer.iteration < total {
            let dir = out
                .join("checkpoints")
                .join(format!("iter_{:06}", trainer.iteration));
            trainer.save(&dir)?;
            write_cameras(&dir.join(CAMERAS_FILE), &cams)?;
        }
    }
    let ck = out.join(CHECKPOINT_DIR);
    trainer.save(&ck)?;
    write_cameras(&ck.join(CAMERAS_FILE), &cams)?;

    let summary = if trainer.iteration == 0 {
        "# blur_fit_psnr skipped: no training iterations".to_string()
    } else {
        let (kernel, awp) = trainer.blur_fit_psnr()?;
        let awp = awp.map_or("none".to_string(), |a| format!("{a:.4}"));
        format!("# blur_fit_psnr kernel={kernel:.4} awp={awp}")
    };
    w(&mut log, &summary)?;
    log.flush().map_err(|e| io_err(&log_path, e))?;
    println!("{}", summary.trim_start_matches("# "));
    println!("checkpoint written to {}", ck.display());
    Ok(())
}
