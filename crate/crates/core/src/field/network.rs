use rand_chacha::ChaCha8Rng;

use super::encoding::{DIR_FREQS, POS_FREQS};
use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{Bound, Linear, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldConfig {
    pub width: usize,
    /// Number of relu layers in the position trunk.
    pub depth: usize,
    /// Trunk layer index that re-reads the encoded position, if any.
    pub skip: Option<usize>,
    /// Channels of the penultimate color layer.
    pub feature_dim: usize,
    pub pos_freqs: usize,
    pub dir_freqs: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            width: 64,
            depth: 4,
            skip: None,
            feature_dim: 128,
            pos_freqs: POS_FREQS,
            dir_freqs: DIR_FREQS,
        }
    }
}

impl FieldConfig {
    pub fn pos_dim(&self) -> usize {
        3 + 6 * self.pos_freqs
    }

    pub fn dir_dim(&self) -> usize {
        3 + 6 * self.dir_freqs
    }
}

/// One evaluated sample: pre-tonemap radiance, density and the penultimate
/// color feature.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldOutput {
    pub radiance: [f64; 3],
    pub density: f64,
    pub penultimate_feature: Vec<f64>,
}

/// Tape handles for a batch of field evaluations shaped `[..., N]`.
#[derive(Clone, Copy, Debug)]
pub struct FieldVars {
    /// `[..., N]`
    pub density: Var,
    /// `[..., N, 3]`
    pub radiance: Var,
    /// `[..., N, feature_dim]`
    pub feature: Var,
}

/// Radiance field network. Density depends only on the encoded position;
/// the direction enters after the density head.
#[derive(Clone, Debug)]
pub struct Field {
    pub config: FieldConfig,
    trunk: Vec<Linear>,
    density: Linear,
    feature: Linear,
    color_hidden: Linear,
    color_out: Linear,
}

impl Field {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        config: FieldConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let (w, p) = (config.width, config.pos_dim());
        let trunk = (0..config.depth)
            .map(|i| {
                let fan_in = if i == 0 {
                    p
                } else if config.skip == Some(i) {
                    w + p
                } else {
                    w
                };
                Linear::new(store, &format!("{name}.trunk.{i}"), fan_in, w, rng)
            })
            .collect();
        let density = Linear::new(store, &format!("{name}.density"), w, 1, rng);
        let feature = Linear::new(store, &format!("{name}.feature"), w, w, rng);
        let color_hidden = Linear::new(
            store,
            &format!("{name}.color_hidden"),
            w + config.dir_dim(),
            config.feature_dim,
            rng,
        );
        let color_out = Linear::new(
            store,
            &format!("{name}.color_out"),
            config.feature_dim,
            3,
            rng,
        );
        Field {
            config,
            trunk,
            density,
            feature,
            color_hidden,
            color_out,
        }
    }

    /// The density output layer, exposed for tests that pin it.
    pub fn density_layer(&self) -> Linear {
        self.density
    }

    /// Evaluates encoded positions `[..., N, pos_dim]` with direction
    /// encodings `[..., 1, dir_dim]` shared across the `N` samples of a ray.
    pub fn eval(
        &self,
        tape: &mut Tape,
        p: &Bound,
        pos_enc: Var,
        dir_enc: Var,
    ) -> Result<FieldVars> {
        let mut h = pos_enc;
        for (i, layer) in self.trunk.iter().enumerate() {
            if self.config.skip == Some(i) {
                let axis = tape.shape(h).len() - 1;
                h = tape.concat(&[h, pos_enc], axis)?;
            }
            h = layer.forward(tape, p, h)?;
            h = tape.relu(h);
        }
        let sigma = self.density.forward(tape, p, h)?;
        let sigma = tape.softplus(sigma);
        let mut dshape = tape.shape(sigma).to_vec();
        dshape.pop();
        let density = tape.reshape(sigma, dshape)?;

        let feat = self.feature.forward(tape, p, h)?;
        // Linear over concat(feature, dir_enc), split so the direction term is
        // computed once per ray instead of once per sample.
        let w = self.config.width;
        let wc = p.var(self.color_hidden.w);
        let w_feat = tape.slice(wc, 0, 0, w)?;
        let w_dir = tape.slice(wc, 0, w, self.config.dir_dim())?;
        let hf = tape.matmul(feat, w_feat)?;
        let hd = tape.matmul(dir_enc, w_dir)?;
        let hd = tape.add(hd, p.var(self.color_hidden.b))?;
        let z = tape.add(hf, hd)?;
        let feature = tape.relu(z);

        let rgb = self.color_out.forward(tape, p, feature)?;
        let radiance = tape.sigmoid(rgb);
        Ok(FieldVars {
            density,
            radiance,
            feature,
        })
    }

    /// Single-point evaluation from already encoded inputs.
    pub fn eval_point(
        &self,
        store: &ParamStore,
        pos_enc: &[f64],
        dir_enc: &[f64],
    ) -> Result<FieldOutput> {
        if pos_enc.len() != self.config.pos_dim() || dir_enc.len() != self.config.dir_dim() {
            return Err(Error::ShapeMismatch {
                op: "eval_field",
                lhs: vec![pos_enc.len(), dir_enc.len()],
                rhs: vec![self.config.pos_dim(), self.config.dir_dim()],
            });
        }
        let mut tape = Tape::new();
        let p = store.bind(&mut tape, false);
        let x = tape.constant(Tensor::new(vec![1, pos_enc.len()], pos_enc.to_vec())?);
        let d = tape.constant(Tensor::new(vec![1, dir_enc.len()], dir_enc.to_vec())?);
        let out = self.eval(&mut tape, &p, x, d)?;
        let r = tape.value(out.radiance).data();
        Ok(FieldOutput {
            radiance: [r[0], r[1], r[2]],
            density: tape.value(out.density).data()[0],
            penultimate_feature: tape.value(out.feature).data().to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::autodiff::{grad_check, softplus};
    use crate::field::positional_encode;

    fn small() -> (ParamStore, Field) {
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = FieldConfig {
            width: 8,
            depth: 3,
            skip: Some(2),
            feature_dim: 8,
            ..FieldConfig::default()
        };
        let f = Field::new(&mut store, "f", cfg, &mut rng);
        (store, f)
    }

    #[test]
    fn zero_density_head_gives_constant_density() {
        let (mut store, f) = small();
        let d = f.density_layer();
        *store.get_mut(d.w) = Tensor::zeros(vec![8, 1]);
        *store.get_mut(d.b) = Tensor::zeros(vec![1]);
        for x in [[0.1, 0.2, 0.3], [-0.5, 0.9, 0.0]] {
            let out = f
                .eval_point(
                    &store,
                    &positional_encode(&x, 10),
                    &positional_encode(&[0.0, 0.0, 1.0], 4),
                )
                .unwrap();
            assert_eq!(out.density, softplus(0.0));
        }
    }

    #[test]
    fn evaluation_is_deterministic_and_sized() {
        let (store, f) = small();
        let pe = positional_encode(&[0.3, 0.1, -0.2], 10);
        let de = positional_encode(&[0.0, 1.0, 0.0], 4);
        let a = f.eval_point(&store, &pe, &de).unwrap();
        let b = f.eval_point(&store, &pe, &de).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.penultimate_feature.len(), 8);
        assert!(a.density >= 0.0 && a.radiance.iter().all(|&c| c >= 0.0));
        assert_eq!(FieldConfig::default().feature_dim, 128);
    }

    #[test]
    fn direction_changes_radiance_not_density() {
        let (store, f) = small();
        let pe = positional_encode(&[0.3, 0.1, -0.2], 10);
        let a = f
            .eval_point(&store, &pe, &positional_encode(&[0.0, 1.0, 0.0], 4))
            .unwrap();
        let b = f
            .eval_point(&store, &pe, &positional_encode(&[0.6, 0.0, 0.8], 4))
            .unwrap();
        assert_eq!(a.density, b.density);
        assert_ne!(a.radiance, b.radiance);
    }

    #[test]
    fn wrong_encoding_width_is_rejected() {
        let (store, f) = small();
        assert!(matches!(
            f.eval_point(&store, &[0.0; 5], &[0.0; 27]),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn batched_eval_matches_point_eval() {
        let (store, f) = small();
        let pts = [[0.3, 0.1, -0.2], [0.5, -0.4, 0.9]];
        let dir = positional_encode(&[0.0, 0.6, 0.8], 4);
        let mut tape = Tape::new();
        let p = store.bind(&mut tape, false);
        let pe: Vec<f64> = pts.iter().flat_map(|x| positional_encode(x, 10)).collect();
        let x = tape.constant(Tensor::new(vec![1, 2, 63], pe).unwrap());
        let d = tape.constant(Tensor::new(vec![1, 1, 27], dir.clone()).unwrap());
        let out = f.eval(&mut tape, &p, x, d).unwrap();
        for (i, x) in pts.iter().enumerate() {
            let single = f
                .eval_point(&store, &positional_encode(x, 10), &dir)
                .unwrap();
            assert!((tape.value(out.density).data()[i] - single.density).abs() < 1e-14);
        }
    }

    #[test]
    fn density_gradient_matches_finite_differences() {
        let (store, f) = small();
        let w0 = store.get(f.trunk[0].w).clone();
        let pe = positional_encode(&[0.3, 0.1, -0.2], 10);
        let de = positional_encode(&[0.0, 1.0, 0.0], 4);
        let err = grad_check(
            |tape, w| {
                let mut p = store.bind(tape, false);
                p.replace(f.trunk[0].w, w);
                let x = tape.constant(Tensor::new(vec![1, 63], pe.clone())?);
                let d = tape.constant(Tensor::new(vec![1, 27], de.clone())?);
                let out = f.eval(tape, &p, x, d)?;
                let c = tape.sum_all(out.radiance)?;
                let sd = tape.sum_all(out.density)?;
                tape.add(c, sd)
            },
            &w0,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
