use super::camera::Camera;
use super::image::Image;
use super::scene::ToyScene;
use crate::error::{Error, Result};
use crate::field::{tone_map, Ray};
use crate::rbk::{screw_to_transform, ScrewAxis};

/// Default dense sample count for ground-truth renders.
pub const SHARP_SAMPLES: usize = 256;

/// How a blurred view was generated. Audit-only: the trainer never sees it.
#[derive(Clone, Debug, PartialEq)]
pub enum BlurSpec {
    /// Jitter screws applied to the base pose in the camera frame.
    Motion { jitters: Vec<ScrewAxis> },
    Defocus {
        aperture: f64,
        focus_distance: f64,
        samples: usize,
    },
}

impl BlurSpec {
    pub fn samples(&self) -> usize {
        match self {
            BlurSpec::Motion { jitters } => jitters.len(),
            BlurSpec::Defocus { samples, .. } => *samples,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BlurSpec::Motion { jitters } => {
                if jitters.is_empty() {
                    return Err(Error::domain("blur", "motion blur needs at least one pose"));
                }
                if jitters
                    .iter()
                    .any(|j| j.r.iter().chain(&j.v).any(|x| !x.is_finite()))
                {
                    return Err(Error::domain("blur", "non-finite jitter"));
                }
            }
            BlurSpec::Defocus {
                aperture,
                focus_distance,
                samples,
            } => {
                if *samples == 0 || !(*aperture >= 0.0) || !(*focus_distance > 0.0) {
                    return Err(Error::domain(
                        "blur",
                        "defocus needs samples >= 1, aperture >= 0, focus > 0",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn render(&self, scene: &ToyScene, cam: &Camera, n: usize) -> Result<Image> {
        match self {
            BlurSpec::Motion { jitters } => synthesize_motion_blur(scene, cam, jitters, n),
            BlurSpec::Defocus {
                aperture,
                focus_distance,
                samples,
            } => synthesize_defocus_blur(scene, cam, *aperture, *focus_distance, *samples, n),
        }
    }
}

/// Pre-tonemap color of `ray` by midpoint quadrature with `n` equal cells.
pub fn render_irradiance(scene: &ToyScene, ray: &Ray, n: usize) -> [f64; 3] {
    let dt = (ray.t_far - ray.t_near) / n as f64;
    let mut transmittance = 1.0;
    let mut color = [0.0; 3];
    for i in 0..n {
        let (sigma, albedo) = scene.query(ray.at(ray.t_near + (i as f64 + 0.5) * dt));
        if sigma == 0.0 {
            continue;
        }
        let alpha = 1.0 - (-sigma * dt).exp();
        for c in 0..3 {
            color[c] += transmittance * alpha * albedo[c];
        }
        transmittance *= 1.0 - alpha;
    }
    color
}

fn irradiance_image(scene: &ToyScene, cam: &Camera, n: usize) -> Vec<[f64; 3]> {
    cam.rays()
        .iter()
        .map(|r| render_irradiance(scene, r, n))
        .collect()
}

fn finish(cam: &Camera, sum: Vec<[f64; 3]>, count: usize) -> Result<Image> {
    let px = sum
        .into_iter()
        .map(|c| tone_map(c.map(|v| v / count as f64)))
        .collect::<Result<Vec<_>>>()?;
    Image::from_f64(cam.width, cam.height, &px)
}

fn accumulate(sum: &mut [[f64; 3]], img: &[[f64; 3]]) {
    for (s, p) in sum.iter_mut().zip(img) {
        for c in 0..3 {
            s[c] += p[c];
        }
    }
}

/// Tonemapped render from the central ray of each pixel.
pub fn render_sharp(scene: &ToyScene, cam: &Camera, n: usize) -> Result<Image> {
    finish(cam, irradiance_image(scene, cam, n), 1)
}

/// `tau_j` evenly spaced in `[-0.5, 0.5]` times `screw`; a single pose sits at 0.
pub fn motion_path(screw: &ScrewAxis, m: usize) -> Vec<ScrewAxis> {
    (0..m)
        .map(|j| {
            let tau = if m == 1 {
                0.0
            } else {
                j as f64 / (m - 1) as f64 - 0.5
            };
            screw.scaled(tau)
        })
        .collect()
}

/// Mean irradiance over the jittered cameras `pose * exp(jitter)`, tonemapped.
pub fn synthesize_motion_blur(
    scene: &ToyScene,
    cam: &Camera,
    jitters: &[ScrewAxis],
    n: usize,
) -> Result<Image> {
    BlurSpec::Motion {
        jitters: jitters.to_vec(),
    }
    .validate()?;
    let mut sum = vec![[0.0; 3]; cam.width * cam.height];
    for j in jitters {
        let moved = cam.with_pose(&cam.pose().compose(&screw_to_transform(j)));
        accumulate(&mut sum, &irradiance_image(scene, &moved, n));
    }
    finish(cam, sum, jitters.len())
}

/// Shirley-Chiu map from the unit square to the unit disk.
pub fn concentric_disk(u: f64, v: f64) -> (f64, f64) {
    let (a, b) = (2.0 * u - 1.0, 2.0 * v - 1.0);
    if a == 0.0 && b == 0.0 {
        return (0.0, 0.0);
    }
    let q = std::f64::consts::FRAC_PI_4;
    let (r, phi) = if a.abs() > b.abs() {
        (a, q * (b / a))
    } else {
        (b, 2.0 * q - q * (a / b))
    };
    (r * phi.cos(), r * phi.sin())
}

/// `m` lens positions on the unit disk: cell centers of the smallest square
/// grid holding `m`, in row order.
pub fn aperture_pattern(m: usize) -> Vec<(f64, f64)> {
    let g = (m as f64).sqrt().ceil() as usize;
    (0..m)
        .map(|i| {
            concentric_disk(
                ((i % g) as f64 + 0.5) / g as f64,
                ((i / g) as f64 + 0.5) / g as f64,
            )
        })
        .collect()
}

/// Thin lens focused on the plane at depth `focus_distance` along the
/// optical axis.
pub fn synthesize_defocus_blur(
    scene: &ToyScene,
    cam: &Camera,
    aperture: f64,
    focus_distance: f64,
    samples: usize,
    n: usize,
) -> Result<Image> {
    BlurSpec::Defocus {
        aperture,
        focus_distance,
        samples,
    }
    .validate()?;
    // Every lens sample coincides with the pinhole.
    let pattern = if aperture == 0.0 {
        vec![(0.0, 0.0)]
    } else {
        aperture_pattern(samples)
    };
    let mut sum = vec![[0.0; 3]; cam.width * cam.height];
    for &(lx, ly) in &pattern {
        let lens = [aperture * lx, aperture * ly, 0.0];
        let img: Vec<[f64; 3]> = (0..cam.height)
            .flat_map(|y| (0..cam.width).map(move |x| (x, y)))
            .map(|(x, y)| {
                // Through the focus point `focus_distance * d` (d has depth -1).
                let d = cam.camera_direction(x, y);
                let dir = std::array::from_fn(|i| d[i] - lens[i] / focus_distance);
                render_irradiance(scene, &cam.ray_from_camera(lens, dir), n)
            })
            .collect();
        accumulate(&mut sum, &img);
    }
    finish(cam, sum, pattern.len())
}
