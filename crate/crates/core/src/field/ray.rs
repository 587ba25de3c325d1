use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: [f64; 3],
    pub direction: [f64; 3],
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    /// Checks `|direction| = 1` (to 1e-9) and `0 <= t_near < t_far`.
    pub fn new(origin: [f64; 3], direction: [f64; 3], t_near: f64, t_far: f64) -> Result<Self> {
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::domain(
                "ray",
                format!("direction norm {norm} is not 1"),
            ));
        }
        if !(0.0 <= t_near && t_near < t_far) || !t_far.is_finite() {
            return Err(Error::domain(
                "ray",
                format!("bad bounds [{t_near}, {t_far}]"),
            ));
        }
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("ray", "non-finite origin"));
        }
        Ok(Ray {
            origin,
            direction,
            t_near,
            t_far,
        })
    }

    /// Normalizes `direction` first.
    pub fn toward(origin: [f64; 3], direction: [f64; 3], t_near: f64, t_far: f64) -> Result<Self> {
        let norm = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::domain("ray", "zero or non-finite direction"));
        }
        Ray::new(origin, direction.map(|d| d / norm), t_near, t_far)
    }

    pub fn at(&self, t: f64) -> [f64; 3] {
        std::array::from_fn(|i| self.origin[i] + t * self.direction[i])
    }
}
