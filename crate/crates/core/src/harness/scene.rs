use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        half_extents: [f64; 3],
    },
}

/// Constant-density, constant-albedo volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub shape: Shape,
    pub center: [f64; 3],
    pub density: f64,
    pub albedo: [f64; 3],
}

impl Primitive {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let d: [f64; 3] = std::array::from_fn(|i| p[i] - self.center[i]);
        match self.shape {
            Shape::Sphere { radius } => d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= radius * radius,
            Shape::Box { half_extents } => (0..3).all(|i| d[i].abs() <= half_extents[i]),
        }
    }
}

/// Analytic volumetric scene over a black background.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ToyScene {
    pub primitives: Vec<Primitive>,
}

impl ToyScene {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self> {
        for p in &primitives {
            if !(p.density >= 0.0) || !p.density.is_finite() {
                return Err(Error::domain(
                    "scene",
                    format!("density {} must be finite and >= 0", p.density),
                ));
            }
            if p.albedo.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(Error::domain(
                    "scene",
                    format!("albedo {:?} outside [0, 1]", p.albedo),
                ));
            }
        }
        Ok(ToyScene { primitives })
    }

    pub fn empty() -> Self {
        ToyScene::default()
    }

    /// Two spheres and a box around the origin, about one unit across.
    pub fn desk() -> Self {
        ToyScene::new(vec![
            Primitive {
                shape: Shape::Sphere { radius: 0.32 },
                center: [0.25, 0.05, 0.35],
                density: 40.0,
                albedo: [0.9, 0.25, 0.15],
            },
            Primitive {
                shape: Shape::Sphere { radius: 0.28 },
                center: [-0.4, 0.15, -0.3],
                density: 40.0,
                albedo: [0.2, 0.45, 0.95],
            },
            Primitive {
                shape: Shape::Box {
                    half_extents: [0.3, 0.18, 0.22],
                },
                center: [0.05, -0.3, -0.05],
                density: 40.0,
                albedo: [0.3, 0.85, 0.3],
            },
        ])
        .expect("valid desk scene")
    }

    /// Total density and density-weighted albedo at `p`.
    pub fn query(&self, p: [f64; 3]) -> (f64, [f64; 3]) {
        let mut sigma = 0.0;
        let mut acc = [0.0; 3];
        for prim in &self.primitives {
            if prim.contains(p) {
                sigma += prim.density;
                for c in 0..3 {
                    acc[c] += prim.density * prim.albedo[c];
                }
            }
        }
        if sigma > 0.0 {
            (sigma, acc.map(|a| a / sigma))
        } else {
            (0.0, [0.0; 3])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_and_queries() {
        assert!(ToyScene::new(vec![Primitive {
            shape: Shape::Sphere { radius: 1.0 },
            center: [0.0; 3],
            density: -1.0,
            albedo: [0.5; 3],
        }])
        .is_err());
        let s = ToyScene::desk();
        assert_eq!(s.primitives.len(), 3);
        let (sigma, c) = s.query(s.primitives[0].center);
        assert_eq!(sigma, 40.0);
        assert_eq!(c, s.primitives[0].albedo);
        assert_eq!(s.query([5.0, 5.0, 5.0]).0, 0.0);
    }
}
