use std::fmt::Write as _;

use sharpfield_core::autodiff::Tape;
use sharpfield_core::harness::{Access, BlurSpec, Camera, Dataset};
use sharpfield_core::rbk::{screw_to_transform, transform_ray, ScrewAxis};
use sharpfield_core::train::{Checkpoint, KernelMode, Phase, RayBatch, Samples};

use super::{load_checkpoint, out_dir, resolve, write};
use crate::error::CliError;
use crate::Common;

pub const KERNEL_FILE: &str = "kernel.txt";
pub const AWP_FILE: &str = "awp_weights.txt";

fn join(xs: impl IntoIterator<Item = f64>) -> String {
    xs.into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn grid(cam: &Camera, stride: usize) -> Vec<(usize, usize)> {
    let off = stride / 2;
    (off..cam.height)
        .step_by(stride)
        .flat_map(|y| (off..cam.width).step_by(stride).map(move |x| (x, y)))
        .collect()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Pearson correlation; `None` when either side is constant.
pub fn correlation(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    (va > 0.0 && vb > 0.0).then(|| cov / (va * vb).sqrt())
}

/// Largest deviation from identity over every motion of every scene:
/// `(transform entries, moved pixel rays on the inspection grid)`.
pub struct Deviation {
    pub transform: f64,
    pub ray: f64,
}

fn awp_weights(
    ck: &Checkpoint,
    cam: &Camera,
    scene: usize,
    px: &[(usize, usize)],
) -> Result<Vec<f64>, CliError> {
    let rays: Vec<_> = px.iter().map(|&(x, y)| cam.ray(x, y)).collect();
    let batch = RayBatch {
        images: vec![scene; rays.len()],
        origins: rays.iter().map(|r| r.origin).collect(),
        directions: rays.iter().map(|r| r.direction).collect(),
        t_near: cam.t_near,
        t_far: cam.t_far,
    };
    let phase = Phase {
        kernel: KernelMode::Learned,
        awp: true,
        lambda: ck.config.lambda_end,
    };
    let mut tape = Tape::new();
    let p = ck.model.store.bind(&mut tape, false);
    let samples = Samples::midpoints(batch.len(), ck.config.n_coarse, ck.config.n_fine);
    let pred = ck
        .model
        .forward(&mut tape, &p, &batch, &samples, phase, None)?;
    let w = pred
        .awp_weights
        .ok_or_else(|| CliError::Internal("forward pass skipped the weight proposal".into()))?;
    Ok(tape.value(w).data().to_vec())
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let cfg = resolve(c)?;
    let (ck, cams) = load_checkpoint(&cfg)?;
    let out = out_dir(c)?;
    let k = ck.config.k;
    let mut dev = Deviation {
        transform: 0.0,
        ray: 0.0,
    };
    let mut text = String::from(
        "# scene motion r0 r1 r2 v0 v1 v2 R00 R01 R02 R10 R11 R12 R20 R21 R22 p0 p1 p2 coarse_weight\n",
    );
    let mut learned = Vec::with_capacity(cams.len());
    for (s, cam) in cams.iter().enumerate() {
        let (motions, weights) = ck.model.rbk.scene_kernel(&ck.model.store, s)?;
        let w = weights.as_slice();
        writeln!(text, "# scene {s} original-ray weight {}", w[0]).unwrap();
        for (q, screw) in motions.screws.iter().enumerate() {
            let t = screw_to_transform(screw);
            let rot: Vec<f64> = t.rotation.iter().flatten().copied().collect();
            let eye = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
            dev.transform = dev
                .transform
                .max(max_abs_diff(&rot, &eye))
                .max(max_abs_diff(&t.translation, &[0.0; 3]));
            for (x, y) in grid(cam, cfg.inspect_grid) {
                let ray = cam.ray(x, y);
                let moved = transform_ray(&ray, screw)?;
                dev.ray = dev
                    .ray
                    .max(max_abs_diff(&moved.origin, &ray.origin))
                    .max(max_abs_diff(&moved.direction, &ray.direction));
            }
            let vals = screw
                .r
                .iter()
                .chain(&screw.v)
                .chain(&rot)
                .chain(&t.translation)
                .copied();
            writeln!(text, "{s} {} {} {}", q + 1, join(vals), w[q + 1]).unwrap();
        }
        learned.push(motions.screws.iter().map(ScrewAxis::angle).sum::<f64>() / k as f64);
    }
    write(&out.join(KERNEL_FILE), &text)?;
    println!(
        "wrote {} motions for each of {} scenes to {}",
        k,
        cams.len(),
        out.join(KERNEL_FILE).display()
    );
    println!("max transform deviation from identity: {:e}", dev.transform);
    println!("max ray deviation from identity: {:e}", dev.ray);

    if ck.config.uses_awp() {
        let mut text = String::from("# scene x y weights over the original ray then each motion\n");
        for (s, cam) in cams.iter().enumerate() {
            let px = grid(cam, cfg.inspect_grid);
            let w = awp_weights(&ck, cam, s, &px)?;
            for (i, (x, y)) in px.iter().enumerate() {
                writeln!(
                    text,
                    "{s} {x} {y} {}",
                    join(w[i * (k + 1)..(i + 1) * (k + 1)].iter().copied())
                )
                .unwrap();
            }
        }
        write(&out.join(AWP_FILE), &text)?;
        println!(
            "wrote weight proposals on a {0}-pixel grid to {1}",
            cfg.inspect_grid,
            out.join(AWP_FILE).display()
        );
    } else {
        println!("checkpoint trains without the weight proposal; no {AWP_FILE}");
    }

    if let Some(dir) = cfg
        .dataset
        .as_ref()
        .filter(|d| d.join("blurspec.txt").exists())
    {
        let ds = Dataset::open(dir, Access::Audit)?;
        let specs = ds.blur_specs()?;
        if specs.len() != cams.len() {
            println!(
                "diagnostic: dataset has {} views, checkpoint {}; skipped",
                specs.len(),
                cams.len()
            );
        } else {
            let generating: Option<Vec<f64>> = specs
                .iter()
                .map(|b| match b {
                    BlurSpec::Motion { jitters } => Some(
                        jitters.iter().map(ScrewAxis::angle).sum::<f64>() / jitters.len() as f64,
                    ),
                    BlurSpec::Defocus { .. } => None,
                })
                .collect();
            match generating.and_then(|g| correlation(&learned, &g)) {
                Some(r) => println!(
                    "diagnostic: rotation-magnitude correlation with generating jitters {r:.4}"
                ),
                None => println!("diagnostic: no motion-blur magnitudes to correlate"),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn correlation_of_affine_copies_is_one() {
        let a = [0.1, 0.4, 0.2, 0.9];
        let b: Vec<f64> = a.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((correlation(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!((correlation(&a, &c).unwrap() + 1.0).abs() < 1e-12);
        assert_eq!(correlation(&a, &[1.0; 4]), None);
    }

    #[test]
    fn grid_is_centered_and_strided() {
        let cam = Camera::look_at(
            [0.0, 0.0, 2.0],
            [0.0; 3],
            [0.0, 1.0, 0.0],
            10.0,
            8,
            4,
            0.1,
            4.0,
        )
        .unwrap();
        assert_eq!(grid(&cam, 4), vec![(2, 2), (6, 2)]);
        assert_eq!(grid(&cam, 1).len(), 32);
    }
}
