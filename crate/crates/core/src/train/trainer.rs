use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::{parse_kv, KernelMode, TrainConfig};
use super::model::{rows, Model, Phase, RayBatch, Samples};
use super::schedule::{lambda_schedule, lr_schedule};
use crate::autodiff::checkpoint::{load_tensors, save_tensors};
use crate::autodiff::{Tape, Tensor};
use crate::error::{Error, Result};
use crate::harness::{psnr, Camera, Image};

/// Stream offset separating per-iteration batch draws from initialization.
const STEP_STREAM: u64 = 1 << 32;

/// One blurred training image and its known pose.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainView {
    pub camera: Camera,
    pub image: Image,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepRecord {
    /// Iteration index the step ran at.
    pub iteration: usize,
    pub loss: f64,
    pub lambda: f64,
    pub lr: f64,
    pub wall_ms: f64,
}

pub const LOG_HEADER: &str = "iteration,loss,lambda,lr,wall_ms";

impl StepRecord {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{:.3}",
            self.iteration, self.loss, self.lambda, self.lr, self.wall_ms
        )
    }
}

/// Central rays of every pixel of `cam`, row-major, tagged with `image`.
pub fn camera_batch(cam: &Camera, image: usize) -> RayBatch {
    let rays = cam.rays();
    RayBatch {
        images: vec![image; rays.len()],
        origins: rays.iter().map(|r| r.origin).collect(),
        directions: rays.iter().map(|r| r.direction).collect(),
        t_near: cam.t_near,
        t_far: cam.t_far,
    }
}

#[derive(Clone, Debug)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Model,
    pub adam: Adam,
    /// Completed iterations.
    pub iteration: usize,
    views: Vec<TrainView>,
}

impl Trainer {
    pub fn new(config: TrainConfig, views: Vec<TrainView>) -> Result<Self> {
        config.validate()?;
        check_views(&views)?;
        let model = Model::new(&config, views.len());
        let adam = Adam::new(&model.store);
        Ok(Trainer {
            config,
            model,
            adam,
            iteration: 0,
            views,
        })
    }

    pub fn views(&self) -> &[TrainView] {
        &self.views
    }

    /// Kernel, proposal and loss weight in effect at iteration `e_c`.
    pub fn phase(&self, e_c: usize) -> Result<Phase> {
        let c = &self.config;
        if c.in_warmup(e_c) || c.kernel == KernelMode::Disabled {
            return Ok(Phase::plain());
        }
        let awp = c.uses_awp();
        let lambda = if awp {
            lambda_schedule(
                e_c,
                c.warmup_iters,
                c.total_iters,
                c.lambda_start,
                c.lambda_end,
            )?
        } else {
            1.0
        };
        Ok(Phase {
            kernel: c.kernel,
            awp,
            lambda,
        })
    }

    /// Phase used to reconstruct the blurred training images after training.
    pub fn final_phase(&self) -> Phase {
        match self.config.kernel {
            KernelMode::Disabled => Phase::plain(),
            kernel => Phase {
                kernel,
                awp: self.config.uses_awp(),
                lambda: self.config.lambda_end,
            },
        }
    }

    fn step_rng(&self, e_c: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(STEP_STREAM + e_c as u64);
        rng
    }

    /// Uniformly drawn pixels of the iteration's batch: rays, blurred targets
    /// and `(image, pixel)` ids.
    pub fn sample_batch(
        &self,
        rng: &mut ChaCha8Rng,
    ) -> (RayBatch, Vec<[f64; 3]>, Vec<(usize, usize)>) {
        let cam = self.views[0].camera;
        let n_px = cam.width * cam.height;
        let mut batch = RayBatch {
            images: Vec::new(),
            origins: Vec::new(),
            directions: Vec::new(),
            t_near: cam.t_near,
            t_far: cam.t_far,
        };
        let mut targets = Vec::new();
        let mut ids = Vec::new();
        for _ in 0..self.config.batch_rays {
            let v = rng.gen_range(0..self.views.len());
            let px = rng.gen_range(0..n_px);
            let view = &self.views[v];
            let ray = view.camera.ray(px % cam.width, px / cam.width);
            batch.images.push(v);
            batch.origins.push(ray.origin);
            batch.directions.push(ray.direction);
            let c = view.image.pixel(px % cam.width, px / cam.width);
            targets.push(c.map(f64::from));
            ids.push((v, px));
        }
        (batch, targets, ids)
    }

    /// One optimization step at the current iteration.
    pub fn step(&mut self) -> Result<StepRecord> {
        let start = Instant::now();
        let e_c = self.iteration;
        let c = &self.config;
        let lr = lr_schedule(e_c, c.total_iters, c.lr_start, c.lr_end)?;
        let phase = self.phase(e_c)?;
        let mut rng = self.step_rng(e_c);
        let (batch, targets, ids) = self.sample_batch(&mut rng);
        let samples = Samples::random(&mut rng, batch.len(), c.n_coarse, c.n_fine);

        let mut tape = Tape::new();
        let p = self.model.store.bind(&mut tape, true);
        let pred = self
            .model
            .forward(&mut tape, &p, &batch, &samples, phase, Some(&targets))?;
        let loss_var = pred.loss.expect("targets were given");
        let loss = tape.value(loss_var).item();
        if !loss.is_finite() {
            let mut outputs = vec![rows(tape.value(pred.coarse)), rows(tape.value(pred.fine))];
            if let Some(a) = pred.awp {
                outputs.push(rows(tape.value(a)));
            }
            let bad = (0..batch.len())
                .find(|&i| outputs.iter().any(|o| o[i].iter().any(|v| !v.is_finite())))
                .unwrap_or(0);
            let mut msg = format!(
                "loss {loss} at iteration {e_c}; ray {bad}: image {} pixel {}",
                ids[bad].0, ids[bad].1
            );
            write!(
                msg,
                ", origin {:?}, direction {:?}, target {:?}, predictions {:?}",
                batch.origins[bad],
                batch.directions[bad],
                targets[bad],
                outputs.iter().map(|o| o[bad]).collect::<Vec<_>>()
            )
            .unwrap();
            return Err(Error::NonFinite(msg));
        }
        let grads = p.collect(&tape.backward(loss_var)?, &self.model.store);
        drop(tape);
        self.adam.step(&mut self.model.store, &grads, lr)?;
        self.iteration += 1;
        Ok(StepRecord {
            iteration: e_c,
            loss,
            lambda: phase.lambda,
            lr,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Steps to `total_iters`, writing one CSV row per step and a checkpoint
    /// under `checkpoints` every `checkpoint_every` iterations.
    pub fn run(
        &mut self,
        log: &mut dyn Write,
        checkpoints: Option<&Path>,
    ) -> Result<Vec<StepRecord>> {
        let mut out = Vec::new();
        while self.iteration < self.config.total_iters {
            let rec = self.step()?;
            writeln!(log, "{}", rec.csv()).map_err(|e| Error::io("training log", e))?;
            out.push(rec);
            let every = self.config.checkpoint_every;
            if let Some(dir) = checkpoints {
                if every > 0 && self.iteration % every == 0 {
                    self.save(&dir.join(format!("iter_{:06}", self.iteration)))?;
                }
            }
        }
        Ok(out)
    }

    /// Sharp render of an arbitrary camera.
    pub fn render(&self, cam: &Camera) -> Result<Image> {
        render_image(&self.model, &self.config, cam)
    }

    /// Mean PSNR of the blurred reconstructions against the training images:
    /// `(kernel-composited, AWP-composited)`.
    pub fn blur_fit_psnr(&self) -> Result<(f64, Option<f64>)> {
        let phase = self.final_phase();
        let (mut a, mut b) = (0.0, 0.0);
        for (i, v) in self.views.iter().enumerate() {
            let cam = v.camera;
            let (fine, awp) = self.model.render_blurred(
                &camera_batch(&cam, i),
                self.config.n_coarse,
                self.config.n_fine,
                phase,
            )?;
            a += psnr(&Image::from_f64(cam.width, cam.height, &fine)?, &v.image)?;
            if let Some(awp) = awp {
                b += psnr(&Image::from_f64(cam.width, cam.height, &awp)?, &v.image)?;
            }
        }
        let n = self.views.len() as f64;
        Ok((a / n, phase.awp.then_some(b / n)))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        save_checkpoint(dir, &self.config, &self.model, &self.adam, self.iteration)
    }

    /// Resumes a checkpoint against the same training views.
    pub fn resume(dir: &Path, views: Vec<TrainView>) -> Result<Self> {
        let ck = Checkpoint::load(dir)?;
        check_views(&views)?;
        if ck.model.rbk.n_images != views.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} images, dataset has {}",
                ck.model.rbk.n_images,
                views.len()
            )));
        }
        Ok(Trainer {
            config: ck.config,
            model: ck.model,
            adam: ck.adam,
            iteration: ck.iteration,
            views,
        })
    }
}

fn check_views(views: &[TrainView]) -> Result<()> {
    let first = views
        .first()
        .ok_or_else(|| Error::Config("training needs at least one view".into()))?;
    let c0 = first.camera;
    for v in views {
        let c = v.camera;
        if (c.width, c.height, c.t_near, c.t_far) != (c0.width, c0.height, c0.t_near, c0.t_far)
            || (v.image.width(), v.image.height()) != (c.width, c.height)
        {
            return Err(Error::Config(
                "training views must share size and depth range".into(),
            ));
        }
    }
    Ok(())
}

/// Sharp render of `cam` with the fine field.
pub fn render_image(model: &Model, config: &TrainConfig, cam: &Camera) -> Result<Image> {
    let px = model.render_sharp(&camera_batch(cam, 0), config.n_coarse, config.n_fine)?;
    Image::from_f64(cam.width, cam.height, &px)
}

/// Everything needed to continue training or to render.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: Model,
    pub adam: Adam,
    pub iteration: usize,
}

pub fn save_checkpoint(
    dir: &Path,
    config: &TrainConfig,
    model: &Model,
    adam: &Adam,
    iteration: usize,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    save_tensors(dir, "params", model.store.iter())?;
    let names: Vec<String> = model.store.iter().map(|(n, _)| n.to_string()).collect();
    let m: Vec<(String, &Tensor)> = names
        .iter()
        .map(|n| format!("m.{n}"))
        .zip(&adam.m)
        .collect();
    let v: Vec<(String, &Tensor)> = names
        .iter()
        .map(|n| format!("v.{n}"))
        .zip(&adam.v)
        .collect();
    save_tensors(
        dir,
        "adam",
        m.iter().chain(&v).map(|(n, t)| (n.as_str(), *t)),
    )?;
    let path = dir.join("config.txt");
    fs::write(&path, config.to_text()).map_err(|e| Error::io(&path, e))?;
    let state = format!(
        "iteration = {iteration}\nadam_t = {}\nn_images = {}\n",
        adam.t, model.rbk.n_images
    );
    let path = dir.join("state.txt");
    fs::write(&path, state).map_err(|e| Error::io(&path, e))
}

impl Checkpoint {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("config.txt");
        let config =
            TrainConfig::from_text(&fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)?;
        let path = dir.join("state.txt");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let (mut iteration, mut adam_t, mut n_images) = (None, None, None);
        for (line, k, v) in parse_kv(&text)? {
            let val: u64 = v
                .parse()
                .map_err(|_| Error::parse(&path, line, format!("bad value `{v}`")))?;
            match k.as_str() {
                "iteration" => iteration = Some(val as usize),
                "adam_t" => adam_t = Some(val),
                "n_images" => n_images = Some(val as usize),
                _ => return Err(Error::parse(&path, line, format!("unknown key `{k}`"))),
            }
        }
        let (Some(iteration), Some(adam_t), Some(n_images)) = (iteration, adam_t, n_images) else {
            return Err(Error::parse(
                &path,
                0,
                "missing iteration, adam_t or n_images",
            ));
        };
        let mut model = Model::new(&config, n_images);
        model.store.assign(load_tensors(dir, "params")?)?;
        let mut adam = Adam::new(&model.store);
        adam.t = adam_t;
        let mut moments = load_tensors(dir, "adam")?;
        if moments.len() != 2 * model.store.len() {
            return Err(Error::Config(format!(
                "adam state has {} tensors for {} parameters",
                moments.len(),
                model.store.len()
            )));
        }
        let v_part = moments.split_off(model.store.len());
        for (i, ((mn, mt), (vn, vt))) in moments.into_iter().zip(v_part).enumerate() {
            let name = model
                .store
                .iter()
                .nth(i)
                .map(|(n, _)| n.to_string())
                .expect("index in range");
            if mn != format!("m.{name}")
                || vn != format!("v.{name}")
                || mt.shape() != adam.m[i].shape()
                || vt.shape() != adam.v[i].shape()
            {
                return Err(Error::Config(format!(
                    "adam state does not match parameter {name}"
                )));
            }
            adam.m[i] = mt;
            adam.v[i] = vt;
        }
        Ok(Checkpoint {
            config,
            model,
            adam,
            iteration,
        })
    }
}
