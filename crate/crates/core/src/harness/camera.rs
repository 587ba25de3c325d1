use crate::error::{Error, Result};
use crate::field::Ray;
use crate::rbk::RigidTransform;

/// Pinhole camera; `rotation` maps camera axes (x right, y up, looking down
/// -z) to world axes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub rotation: [[f64; 3]; 3],
    pub position: [f64; 3],
    /// Focal length in pixels.
    pub focal: f64,
    pub width: usize,
    pub height: usize,
    pub t_near: f64,
    pub t_far: f64,
}

fn normalize(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    v.map(|x| x / n)
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

impl Camera {
    pub fn new(
        rotation: [[f64; 3]; 3],
        position: [f64; 3],
        focal: f64,
        width: usize,
        height: usize,
        t_near: f64,
        t_far: f64,
    ) -> Result<Self> {
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::domain("camera", "rotation is not orthonormal"));
                }
            }
        }
        if !(focal > 0.0) || width == 0 || height == 0 || !(0.0 <= t_near && t_near < t_far) {
            return Err(Error::domain("camera", "bad intrinsics or depth bounds"));
        }
        Ok(Camera {
            rotation,
            position,
            focal,
            width,
            height,
            t_near,
            t_far,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        focal: f64,
        width: usize,
        height: usize,
        t_near: f64,
        t_far: f64,
    ) -> Result<Self> {
        let back = normalize(std::array::from_fn(|i| eye[i] - target[i]));
        let right = normalize(cross(up, back));
        let true_up = cross(back, right);
        let rotation = std::array::from_fn(|i| [right[i], true_up[i], back[i]]);
        Camera::new(rotation, eye, focal, width, height, t_near, t_far)
    }

    pub fn pose(&self) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation,
            translation: self.position,
        }
    }

    pub fn with_pose(&self, pose: &RigidTransform) -> Camera {
        Camera {
            rotation: pose.rotation,
            position: pose.translation,
            ..*self
        }
    }

    /// `[R | t]` row-major.
    pub fn pose_row_major(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for i in 0..3 {
            out[i * 4..i * 4 + 3].copy_from_slice(&self.rotation[i]);
            out[i * 4 + 3] = self.position[i];
        }
        out
    }

    pub fn from_row_major(
        pose: &[f64; 12],
        focal: f64,
        width: usize,
        height: usize,
        t_near: f64,
        t_far: f64,
    ) -> Result<Self> {
        let rotation = std::array::from_fn(|i| [pose[i * 4], pose[i * 4 + 1], pose[i * 4 + 2]]);
        let position = [pose[3], pose[7], pose[11]];
        Camera::new(rotation, position, focal, width, height, t_near, t_far)
    }

    /// Unnormalized camera-frame direction through the center of pixel `(x, y)`,
    /// with depth component -1.
    pub fn camera_direction(&self, x: usize, y: usize) -> [f64; 3] {
        [
            (x as f64 + 0.5 - self.width as f64 / 2.0) / self.focal,
            -(y as f64 + 0.5 - self.height as f64 / 2.0) / self.focal,
            -1.0,
        ]
    }

    pub fn to_world(&self, v: [f64; 3]) -> [f64; 3] {
        self.pose().rotate(v)
    }

    /// Ray from the camera-frame point `origin` along camera-frame `dir`.
    pub fn ray_from_camera(&self, origin: [f64; 3], dir: [f64; 3]) -> Ray {
        let o = self.pose().apply(origin);
        Ray::toward(o, self.to_world(dir), self.t_near, self.t_far).expect("camera ray is valid")
    }

    pub fn ray(&self, x: usize, y: usize) -> Ray {
        self.ray_from_camera([0.0; 3], self.camera_direction(x, y))
    }

    /// All central rays in row-major pixel order.
    pub fn rays(&self) -> Vec<Ray> {
        (0..self.height)
            .flat_map(|y| (0..self.width).map(move |x| (x, y)))
            .map(|(x, y)| self.ray(x, y))
            .collect()
    }

    /// Depth of a world point along the optical axis.
    pub fn depth_of(&self, p: [f64; 3]) -> f64 {
        let d: [f64; 3] = std::array::from_fn(|i| p[i] - self.position[i]);
        -(0..3).map(|i| self.rotation[i][2] * d[i]).sum::<f64>()
    }
}
