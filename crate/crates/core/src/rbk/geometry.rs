use crate::autodiff::Real;
use crate::error::Result;
use crate::field::Ray;

/// Below this rotation angle the Rodrigues coefficients use their Taylor forms.
pub const TAYLOR_THRESHOLD: f64 = 1e-6;

/// Screw coordinates `S = (r; v)`: axis-angle rotation `r` and the
/// translation parameter `v`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ScrewAxis {
    pub r: [f64; 3],
    pub v: [f64; 3],
}

impl ScrewAxis {
    pub fn new(r: [f64; 3], v: [f64; 3]) -> Self {
        ScrewAxis { r, v }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        ScrewAxis {
            r: [s[0], s[1], s[2]],
            v: [s[3], s[4], s[5]],
        }
    }

    pub fn angle(&self) -> f64 {
        self.r.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, tau: f64) -> Self {
        ScrewAxis {
            r: self.r.map(|x| x * tau),
            v: self.v.map(|x| x * tau),
        }
    }
}

/// Rotation plus translation acting as `x -> R x + p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl RigidTransform {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    pub fn rotate(&self, x: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        std::array::from_fn(|i| r[i][0] * x[0] + r[i][1] * x[1] + r[i][2] * x[2])
    }

    pub fn apply(&self, x: [f64; 3]) -> [f64; 3] {
        let y = self.rotate(x);
        std::array::from_fn(|i| y[i] + self.translation[i])
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let (a, b) = (&self.rotation, &other.rotation);
        let rotation = std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum())
        });
        RigidTransform {
            rotation,
            translation: self.apply(other.translation),
        }
    }

    /// Rotation rows followed by the translation, 12 values.
    pub fn to_row_major(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for i in 0..3 {
            out[i * 3..i * 3 + 3].copy_from_slice(&self.rotation[i]);
        }
        out[9..].copy_from_slice(&self.translation);
        out
    }
}

pub fn skew<T: Real>(r: [T; 3]) -> [[T; 3]; 3] {
    let z = T::constant(0.0);
    [[z, -r[2], r[1]], [r[2], z, -r[0]], [-r[1], r[0], z]]
}

/// `(sin t / t, (1 - cos t) / t^2, (t - sin t) / t^3)` from `t^2`.
pub fn rodrigues_coefficients<T: Real>(theta2: T) -> (T, T, T) {
    let c = T::constant;
    if theta2.value() < TAYLOR_THRESHOLD * TAYLOR_THRESHOLD {
        (
            c(1.0) - theta2 / c(6.0),
            c(0.5) - theta2 / c(24.0),
            c(1.0 / 6.0) - theta2 / c(120.0),
        )
    } else {
        let t = theta2.sqrt();
        let s = t.sin();
        let h = (t / c(2.0)).sin();
        (s / t, c(2.0) * h * h / theta2, (t - s) / (theta2 * t))
    }
}

/// Exponential of the screw `(r; v)`: `R = I + A K + B K^2` and
/// `p = (I + B K + C K^2) v` with `K = [r]x`.
pub fn screw_exp<T: Real>(s: &[T; 6]) -> ([[T; 3]; 3], [T; 3]) {
    let r = [s[0], s[1], s[2]];
    let v = [s[3], s[4], s[5]];
    let theta2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
    let (a, b, c) = rodrigues_coefficients(theta2);
    let k = skew(r);
    let k2: [[T; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|j| k[i][0] * k[0][j] + k[i][1] * k[1][j] + k[i][2] * k[2][j])
    });
    let eye = |i: usize, j: usize| T::constant(if i == j { 1.0 } else { 0.0 });
    let rot =
        std::array::from_fn(|i| std::array::from_fn(|j| eye(i, j) + a * k[i][j] + b * k2[i][j]));
    let g: [[T; 3]; 3] =
        std::array::from_fn(|i| std::array::from_fn(|j| eye(i, j) + b * k[i][j] + c * k2[i][j]));
    let p = std::array::from_fn(|i| g[i][0] * v[0] + g[i][1] * v[1] + g[i][2] * v[2]);
    (rot, p)
}

pub fn screw_to_transform(s: &ScrewAxis) -> RigidTransform {
    let flat = [s.r[0], s.r[1], s.r[2], s.v[0], s.v[1], s.v[2]];
    let (rotation, translation) = screw_exp(&flat);
    RigidTransform {
        rotation,
        translation,
    }
}

/// Moves the ray as a line: the origin rigidly, the direction by rotation only.
pub fn transform_ray(ray: &Ray, s: &ScrewAxis) -> Result<Ray> {
    let t = screw_to_transform(s);
    Ray::new(
        t.apply(ray.origin),
        t.rotate(ray.direction),
        ray.t_near,
        ray.t_far,
    )
}
