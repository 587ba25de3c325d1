use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::compose::CompositionWeights;
use super::geometry::{screw_exp, ScrewAxis};
use crate::autodiff::{Dual, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::nn::{Bound, Mlp, ParamId, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RbkConfig {
    /// Number of rigid motions besides the original ray.
    pub k: usize,
    pub latent_dim: usize,
    pub encoder_width: usize,
    pub encoder_depth: usize,
    pub head_width: usize,
    /// Half-width of the uniform init of the screw decoders' last layers.
    pub last_layer_init: f64,
    pub latent_std: f64,
}

impl Default for RbkConfig {
    fn default() -> Self {
        RbkConfig {
            k: 4,
            latent_dim: 64,
            encoder_width: 64,
            encoder_depth: 4,
            head_width: 32,
            last_layer_init: 1e-5,
            latent_std: 1.0,
        }
    }
}

/// The `k` screws shared by every pixel of one image.
#[derive(Clone, Debug, PartialEq)]
pub struct RigidMotionSet {
    pub screws: Vec<ScrewAxis>,
}

/// Tape handles for the kernel of a set of images.
#[derive(Clone, Copy, Debug)]
pub struct KernelVars {
    /// `[U, k, 6]` screw coordinates `(r; v)`.
    pub screws: Var,
    /// `[U, k, 12]` rotation rows then translation.
    pub transforms: Var,
    /// `[U, k + 1]` composition weights.
    pub weights: Var,
}

#[derive(Clone, Debug)]
pub struct Rbk {
    pub config: RbkConfig,
    pub n_images: usize,
    latents: ParamId,
    encoder: Mlp,
    rot: Mlp,
    trans: Mlp,
    weights: Mlp,
}

impl Rbk {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        config: RbkConfig,
        n_images: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let normal = Normal::new(0.0, config.latent_std).expect("finite std");
        let table: Vec<f64> = (0..n_images * config.latent_dim)
            .map(|_| normal.sample(rng))
            .collect();
        let latents = store.add(
            format!("{name}.latent"),
            Tensor::new(vec![n_images, config.latent_dim], table).expect("table shape"),
        );
        let mut enc = vec![config.latent_dim];
        enc.extend(std::iter::repeat(config.encoder_width).take(config.encoder_depth));
        let encoder = Mlp::new(store, &format!("{name}.encoder"), &enc, true, rng);
        let e = if config.encoder_depth == 0 {
            config.latent_dim
        } else {
            config.encoder_width
        };
        let head = |store: &mut ParamStore, rng: &mut ChaCha8Rng, n: &str, out: usize| {
            Mlp::new(
                store,
                &format!("{name}.{n}"),
                &[e, config.head_width, out],
                false,
                rng,
            )
        };
        let rot = head(store, rng, "rot", 3 * config.k);
        let trans = head(store, rng, "trans", 3 * config.k);
        let weights = head(store, rng, "weights", config.k + 1);
        for mlp in [&rot, &trans] {
            let last = *mlp.layers.last().unwrap();
            let w = store.get(last.w).shape().to_vec();
            *store.get_mut(last.w) = crate::nn::uniform(rng, w, config.last_layer_init);
            *store.get_mut(last.b) = Tensor::zeros(vec![3 * config.k]);
        }
        Rbk {
            config,
            n_images,
            latents,
            encoder,
            rot,
            trans,
            weights,
        }
    }

    pub fn latent_param(&self) -> ParamId {
        self.latents
    }

    fn check_index(&self, s: usize) -> Result<()> {
        if s >= self.n_images {
            return Err(Error::IndexOutOfRange {
                what: "scene latent",
                index: s,
                len: self.n_images,
            });
        }
        Ok(())
    }

    /// The learnable latent row of image `s`.
    pub fn embed_scene(&self, store: &ParamStore, s: usize) -> Result<Vec<f64>> {
        self.check_index(s)?;
        let d = self.config.latent_dim;
        Ok(store.get(self.latents).data()[s * d..(s + 1) * d].to_vec())
    }

    /// Latent rows for `scenes` on the tape, `[n, latent_dim]`.
    pub fn embed(&self, tape: &mut Tape, p: &Bound, scenes: &[usize]) -> Result<Var> {
        for &s in scenes {
            self.check_index(s)?;
        }
        tape.gather_rows(p.var(self.latents), scenes)
    }

    /// Decodes latents `[U, latent_dim]` into screws, transforms and weights.
    pub fn heads(&self, tape: &mut Tape, p: &Bound, latent: Var) -> Result<KernelVars> {
        let u = tape.shape(latent)[0];
        let k = self.config.k;
        let e = self.encoder.forward(tape, p, latent)?;
        let r = self.rot.forward(tape, p, e)?;
        let v = self.trans.forward(tape, p, e)?;
        let r = tape.reshape(r, vec![u, k, 3])?;
        let v = tape.reshape(v, vec![u, k, 3])?;
        let screws = tape.concat(&[r, v], 2)?;
        let transforms = tape.map_rows::<6, 12>(screws, |_, s| {
            let (rot, p) = screw_exp::<Dual<6>>(&s);
            let mut out = [Dual::<6>::seed(0.0, 0); 12];
            for i in 0..3 {
                out[i * 3..i * 3 + 3].copy_from_slice(&rot[i]);
            }
            out[9..].copy_from_slice(&p);
            out
        })?;
        let logits = self.weights.forward(tape, p, e)?;
        let weights = crate::nn::normalized_sigmoid(tape, logits)?;
        Ok(KernelVars {
            screws,
            transforms,
            weights,
        })
    }

    /// Kernel of image `s` evaluated without recording gradients.
    pub fn scene_kernel(
        &self,
        store: &ParamStore,
        s: usize,
    ) -> Result<(RigidMotionSet, CompositionWeights)> {
        let l = self.embed_scene(store, s)?;
        self.rbk_heads(store, &l)
    }

    /// Kernel decoded from an explicit latent vector.
    pub fn rbk_heads(
        &self,
        store: &ParamStore,
        latent: &[f64],
    ) -> Result<(RigidMotionSet, CompositionWeights)> {
        if latent.len() != self.config.latent_dim {
            return Err(Error::ShapeMismatch {
                op: "rbk_heads",
                lhs: vec![latent.len()],
                rhs: vec![self.config.latent_dim],
            });
        }
        let mut tape = Tape::new();
        let p = store.bind(&mut tape, false);
        let l = tape.constant(Tensor::new(vec![1, latent.len()], latent.to_vec())?);
        let kv = self.heads(&mut tape, &p, l)?;
        let s = tape.value(kv.screws).data();
        let screws = s.chunks_exact(6).map(ScrewAxis::from_slice).collect();
        let w = CompositionWeights::new(tape.value(kv.weights).data().to_vec())?;
        Ok((RigidMotionSet { screws }, w))
    }
}

/// Applies per-ray transforms `[B, k, 12]` to constant origins and
/// directions `[B, 3]`, returning `(origins, directions)` shaped `[k, B, 3]`.
pub fn transform_rays_on_tape(
    tape: &mut Tape,
    transforms: Var,
    origins: &Tensor,
    dirs: &Tensor,
) -> Result<(Var, Var)> {
    let (b, k) = (tape.shape(transforms)[0], tape.shape(transforms)[1]);
    let rot = tape.slice(transforms, 2, 0, 9)?;
    let rot = tape.reshape(rot, vec![b, k, 3, 3])?;
    let trans = tape.slice(transforms, 2, 9, 3)?;
    let apply = |tape: &mut Tape, x: &Tensor| -> Result<Var> {
        let x = tape.constant(x.clone().reshape(vec![b, 1, 1, 3])?);
        let prod = tape.mul(rot, x)?;
        tape.sum_axis(prod, 3, false)
    };
    let o = apply(tape, origins)?;
    let o = tape.add(o, trans)?;
    let d = apply(tape, dirs)?;
    Ok((tape.swap_axes(o, 0, 1)?, tape.swap_axes(d, 0, 1)?))
}
