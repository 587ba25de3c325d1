use std::f64::consts::TAU;
use std::path::Path;

use sharpfield_core::harness::Camera;

use crate::config::SpiralConfig;
use crate::error::{io_err, CliError};

fn add(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    std::array::from_fn(|i| a[i] + s * b[i])
}

fn norm(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn unit(v: [f64; 3]) -> Result<[f64; 3], CliError> {
    let n = norm(v);
    if !(n > 1e-12) {
        return Err(CliError::User(
            "training cameras have no common viewing direction".into(),
        ));
    }
    Ok(v.map(|x| x / n))
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Cameras circling the mean training pose while moving back and forth
/// along its viewing axis, all aimed at one point in front of it.
pub fn spiral(cams: &[Camera], cfg: &SpiralConfig) -> Result<Vec<Camera>, CliError> {
    let first = cams
        .first()
        .ok_or_else(|| CliError::User("no training cameras to build a spiral around".into()))?;
    let n = cams.len() as f64;
    let mut center = [0.0; 3];
    let mut forward = [0.0; 3];
    let mut up = [0.0; 3];
    for c in cams {
        center = add(center, c.position, 1.0 / n);
        forward = add(forward, std::array::from_fn(|i| c.rotation[i][2]), -1.0);
        up = add(up, std::array::from_fn(|i| c.rotation[i][1]), 1.0);
    }
    let forward = unit(forward)?;
    let right = unit(cross(forward, up))?;
    let up = cross(right, forward);
    let look = if cfg.look_distance > 0.0 {
        cfg.look_distance
    } else {
        cams.iter().map(|c| norm(c.position)).sum::<f64>() / n
    };
    let target = add(center, forward, look);
    (0..cfg.frames)
        .map(|i| {
            let theta = TAU * cfg.turns * i as f64 / cfg.frames as f64;
            let eye = add(center, right, cfg.radius * theta.cos());
            let eye = add(eye, up, cfg.radius * theta.sin());
            let eye = add(eye, forward, cfg.depth * (0.5 * theta).sin());
            Camera::look_at(
                eye,
                target,
                up,
                first.focal,
                first.width,
                first.height,
                first.t_near,
                first.t_far,
            )
            .map_err(|e| CliError::User(format!("spiral frame {i}: {e}")))
        })
        .collect()
}

/// One camera per line of 12 row-major `[R | t]` floats; `#` starts a comment.
pub fn read_poses(path: &Path, intrinsics: &Camera) -> Result<Vec<Camera>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad =
        |line: usize, msg: String| CliError::User(format!("{}:{line}: {msg}", path.display()));
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<_>>()
            .ok_or_else(|| bad(i + 1, "expected finite numbers".into()))?;
        let pose: [f64; 12] = vals
            .as_slice()
            .try_into()
            .map_err(|_| bad(i + 1, format!("expected 12 values, found {}", vals.len())))?;
        let c = intrinsics;
        out.push(
            Camera::from_row_major(&pose, c.focal, c.width, c.height, c.t_near, c.t_far)
                .map_err(|e| bad(i + 1, e.to_string()))?,
        );
    }
    if out.is_empty() {
        return Err(CliError::User(format!("{}: no poses", path.display())));
    }
    Ok(out)
}
