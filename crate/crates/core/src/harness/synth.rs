use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};

use super::blur::{motion_path, render_sharp, BlurSpec};
use super::camera::Camera;
use super::dataset::View;
use super::image::Image;
use super::metrics::psnr;
use super::scene::{Shape, ToyScene};
use crate::error::{Error, Result};
use crate::rbk::ScrewAxis;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlurKind {
    Motion,
    Defocus,
}

/// Ring of cameras looking at the origin, plus blur parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub views: usize,
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    pub distance: f64,
    pub elevation: f64,
    /// Azimuths span `[-spread, spread]` around `+z`.
    pub spread: f64,
    pub t_near: f64,
    pub t_far: f64,
    pub blur: BlurKind,
    pub motion_samples: usize,
    /// Norm of the rotation part of each view's shake screw (radians).
    pub motion_rotation: f64,
    pub motion_translation: f64,
    pub aperture: f64,
    pub defocus_samples: usize,
    pub render_samples: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            views: 5,
            width: 64,
            height: 64,
            focal: 80.0,
            distance: 1.9,
            elevation: 0.3,
            spread: 0.5,
            t_near: 0.6,
            t_far: 3.2,
            blur: BlurKind::Motion,
            motion_samples: 10,
            motion_rotation: 0.06,
            motion_translation: 0.05,
            aperture: 0.05,
            defocus_samples: 16,
            render_samples: 256,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn cameras(&self) -> Result<Vec<Camera>> {
        if self.views == 0 {
            return Err(Error::Config("views must be >= 1".into()));
        }
        (0..self.views)
            .map(|i| {
                let az = if self.views == 1 {
                    0.0
                } else {
                    -self.spread + 2.0 * self.spread * i as f64 / (self.views - 1) as f64
                };
                let (ce, se) = (self.elevation.cos(), self.elevation.sin());
                let eye = [
                    self.distance * ce * az.sin(),
                    self.distance * se,
                    self.distance * ce * az.cos(),
                ];
                Camera::look_at(
                    eye,
                    [0.0; 3],
                    [0.0, 1.0, 0.0],
                    self.focal,
                    self.width,
                    self.height,
                    self.t_near,
                    self.t_far,
                )
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub views: Vec<View>,
    pub blur: Vec<BlurSpec>,
}

impl Synthesized {
    /// PSNR of each blurred view against its sharp render.
    pub fn blur_psnr(&self) -> Vec<f64> {
        self.views
            .iter()
            .map(|v| {
                psnr(
                    &v.blurred,
                    v.sharp.as_ref().expect("synthesized views are sharp"),
                )
                .expect("same size")
            })
            .collect()
    }
}

/// Optical-axis depth of the nearest sphere surface, the defocus focus plane.
fn front_sphere_depth(scene: &ToyScene, cam: &Camera) -> Result<f64> {
    scene
        .primitives
        .iter()
        .filter_map(|p| match p.shape {
            Shape::Sphere { radius } => Some(cam.depth_of(p.center) - radius),
            Shape::Box { .. } => None,
        })
        .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.min(d))))
        .filter(|d| *d > 0.0)
        .ok_or_else(|| Error::Config("defocus focus needs a sphere in front of the camera".into()))
}

fn random_screw(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> ScrewAxis {
    let r: [f64; 3] = UnitSphere.sample(rng);
    let v: [f64; 3] = UnitSphere.sample(rng);
    let scale = rng.gen_range(0.7..1.0);
    ScrewAxis::new(r.map(|x| x * rot * scale), v.map(|x| x * trans * scale))
}

pub fn synthesize(scene: &ToyScene, cfg: &SynthConfig) -> Result<Synthesized> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut views = Vec::new();
    let mut blur = Vec::new();
    for camera in cfg.cameras()? {
        let spec = match cfg.blur {
            BlurKind::Motion => BlurSpec::Motion {
                jitters: motion_path(
                    &random_screw(&mut rng, cfg.motion_rotation, cfg.motion_translation),
                    cfg.motion_samples,
                ),
            },
            BlurKind::Defocus => BlurSpec::Defocus {
                aperture: cfg.aperture,
                focus_distance: front_sphere_depth(scene, &camera)?,
                samples: cfg.defocus_samples,
            },
        };
        let blurred: Image = spec.render(scene, &camera, cfg.render_samples)?;
        let sharp = render_sharp(scene, &camera, cfg.render_samples)?;
        views.push(View {
            camera,
            blurred,
            sharp: Some(sharp),
        });
        blur.push(spec);
    }
    Ok(Synthesized { views, blur })
}
