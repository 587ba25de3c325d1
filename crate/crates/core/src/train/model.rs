use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{KernelMode, TrainConfig};
use super::loss::mse_on_tape;
use crate::autodiff::{Tape, Tensor, Var};
use crate::awp::Awp;
use crate::error::{Error, Result};
use crate::field::{
    deltas, hierarchical_from_u, merge_sorted, render_on_tape, stratified_from_u, tone_map_tape,
    Field,
};
use crate::nn::{Bound, ParamStore};
use crate::rbk::{compose_on_tape, transform_rays_on_tape, Rbk};

/// Rays sharing one depth range, each tagged with its source image.
#[derive(Clone, Debug, PartialEq)]
pub struct RayBatch {
    pub images: Vec<usize>,
    pub origins: Vec<[f64; 3]>,
    pub directions: Vec<[f64; 3]>,
    pub t_near: f64,
    pub t_far: f64,
}

impl RayBatch {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    pub fn slice(&self, start: usize, end: usize) -> RayBatch {
        RayBatch {
            images: self.images[start..end].to_vec(),
            origins: self.origins[start..end].to_vec(),
            directions: self.directions[start..end].to_vec(),
            t_near: self.t_near,
            t_far: self.t_far,
        }
    }

    fn tensor(rows: &[[f64; 3]]) -> Tensor {
        Tensor::new(vec![rows.len(), 3], rows.concat()).expect("rows of three")
    }
}

/// Where each ray is sampled.
#[derive(Clone, Debug, PartialEq)]
pub enum Samples {
    /// Per-pixel offsets in `[0, 1)`, shared by every motion of a pixel:
    /// `coarse [B, N_c]` for stratified bins, `fine [B, N_f]` for the inverse CDF.
    Jitter { coarse: Vec<f64>, fine: Vec<f64> },
    /// Explicit sorted depths `coarse [N_m, B, N_c]` and `fine [N_m, B, N_f]`.
    Fixed { coarse: Vec<f64>, fine: Vec<f64> },
}

impl Samples {
    pub fn random(rng: &mut ChaCha8Rng, rays: usize, n_coarse: usize, n_fine: usize) -> Self {
        let coarse = (0..rays * n_coarse).map(|_| rng.gen()).collect();
        let fine = (0..rays * n_fine).map(|_| rng.gen()).collect();
        Samples::Jitter { coarse, fine }
    }

    /// Deterministic bin centers, used for rendering.
    pub fn midpoints(rays: usize, n_coarse: usize, n_fine: usize) -> Self {
        Samples::Jitter {
            coarse: vec![0.5; rays * n_coarse],
            fine: vec![0.5; rays * n_fine],
        }
    }
}

/// Which parts of the pipeline a forward pass runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Phase {
    pub kernel: KernelMode,
    pub awp: bool,
    /// Weight of the kernel-composited fine loss against the AWP one.
    pub lambda: f64,
}

impl Phase {
    pub fn plain() -> Self {
        Phase {
            kernel: KernelMode::Disabled,
            awp: false,
            lambda: 1.0,
        }
    }
}

/// Outputs of one forward pass; colors are tonemapped.
#[derive(Clone, Copy, Debug)]
pub struct Prediction {
    pub n_motions: usize,
    /// Coarse pass composited with the kernel weights, `[B, 3]`.
    pub coarse: Var,
    /// Fine pass composited with the kernel weights, `[B, 3]`.
    pub fine: Var,
    /// Fine pass composited with the AWP weights, `[B, 3]`.
    pub awp: Option<Var>,
    /// `[N_m, B, 3]` per-motion fine colors.
    pub fine_colors: Var,
    /// `[B, N_m]` kernel weights.
    pub ccw: Option<Var>,
    /// `[B, N_m]` AWP weights.
    pub awp_weights: Option<Var>,
    pub loss: Option<Var>,
}

struct Pass {
    color: Var,
    weights: Var,
    feature: Var,
    delta: Tensor,
    dir_enc: Var,
}

/// Coarse and fine fields plus the blur kernel and weight proposal, all in
/// one parameter store.
#[derive(Clone, Debug)]
pub struct Model {
    pub store: ParamStore,
    pub coarse: Field,
    pub fine: Field,
    pub rbk: Rbk,
    pub awp: Awp,
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn permute_01(t: &Tensor) -> Tensor {
    let s = t.shape();
    let (a, b) = (s[0], s[1]);
    let inner: usize = s[2..].iter().product();
    let mut out = Vec::with_capacity(t.numel());
    for j in 0..b {
        for i in 0..a {
            out.extend_from_slice(&t.data()[(i * b + j) * inner..(i * b + j + 1) * inner]);
        }
    }
    let mut shape = s.to_vec();
    shape.swap(0, 1);
    Tensor::new(shape, out).expect("same element count")
}

impl Model {
    /// Each component draws from its own stream of `config.seed`, so the
    /// fields start identical whatever the kernel settings.
    pub fn new(config: &TrainConfig, n_images: usize) -> Self {
        let mut store = ParamStore::new();
        let coarse = Field::new(
            &mut store,
            "coarse",
            config.field_config(),
            &mut stream_rng(config.seed, 1),
        );
        let fine = Field::new(
            &mut store,
            "fine",
            config.field_config(),
            &mut stream_rng(config.seed, 2),
        );
        let rbk = Rbk::new(
            &mut store,
            "rbk",
            config.rbk_config(),
            n_images,
            &mut stream_rng(config.seed, 3),
        );
        let awp = Awp::new(
            &mut store,
            "awp",
            config.awp_config(),
            &mut stream_rng(config.seed, 4),
        );
        Model {
            store,
            coarse,
            fine,
            rbk,
            awp,
        }
    }

    fn pass(
        &self,
        tape: &mut Tape,
        p: &Bound,
        field: &Field,
        origins: Var,
        dirs: Var,
        t: &Tensor,
        t_far: f64,
    ) -> Result<Pass> {
        let (nm, b, n) = (t.shape()[0], t.shape()[1], t.shape()[2]);
        let o = tape.reshape(origins, vec![nm, b, 1, 3])?;
        let d = tape.reshape(dirs, vec![nm, b, 1, 3])?;
        let tt = tape.constant(t.clone().reshape(vec![nm, b, n, 1])?);
        let step = tape.mul(tt, d)?;
        let x = tape.add(o, step)?;
        let pos_enc = tape.fourier_features(x, field.config.pos_freqs)?;
        let dir_enc = tape.fourier_features(d, field.config.dir_freqs)?;
        let out = field.eval(tape, p, pos_enc, dir_enc)?;
        let mut delta = Vec::with_capacity(t.numel());
        for row in t.data().chunks_exact(n) {
            delta.extend(deltas(row, t_far)?);
        }
        let delta = Tensor::new(vec![nm, b, n], delta)?;
        let (color, weights) = render_on_tape(tape, out.density, out.radiance, &delta)?;
        Ok(Pass {
            color,
            weights,
            feature: out.feature,
            delta,
            dir_enc,
        })
    }

    /// Runs the coarse and fine passes over every motion of every ray and
    /// composites. With `targets`, also records the training loss.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        batch: &RayBatch,
        samples: &Samples,
        phase: Phase,
        targets: Option<&[[f64; 3]]>,
    ) -> Result<Prediction> {
        let b = batch.len();
        let (nc_total, nf_total) = match samples {
            Samples::Jitter { coarse, fine } | Samples::Fixed { coarse, fine } => {
                (coarse.len(), fine.len())
            }
        };
        let k = self.rbk.config.k;
        let o0 = RayBatch::tensor(&batch.origins);
        let d0 = RayBatch::tensor(&batch.directions);
        let (origins, dirs, ccw, latent, nm) = match phase.kernel {
            KernelMode::Disabled => {
                let o = tape.constant(o0.reshape(vec![1, b, 3])?);
                let d = tape.constant(d0.reshape(vec![1, b, 3])?);
                (o, d, None, None, 1)
            }
            KernelMode::FrozenIdentity => {
                let nm = k + 1;
                let rep = |t: &Tensor| Tensor::new(vec![nm, b, 3], t.data().repeat(nm));
                let o = tape.constant(rep(&o0)?);
                let d = tape.constant(rep(&d0)?);
                let mut w = vec![0.0; b * nm];
                for row in w.chunks_exact_mut(nm) {
                    row[0] = 1.0;
                }
                let w = tape.constant(Tensor::new(vec![b, nm], w)?);
                (o, d, Some(w), None, nm)
            }
            KernelMode::Learned => {
                let latent = self.rbk.embed(tape, p, &batch.images)?;
                let kv = self.rbk.heads(tape, p, latent)?;
                let (om, dm) = transform_rays_on_tape(tape, kv.transforms, &o0, &d0)?;
                let oc = tape.constant(o0.reshape(vec![1, b, 3])?);
                let dc = tape.constant(d0.reshape(vec![1, b, 3])?);
                let o = tape.concat(&[oc, om], 0)?;
                let d = tape.concat(&[dc, dm], 0)?;
                (o, d, Some(kv.weights), Some(latent), k + 1)
            }
        };
        if phase.awp && latent.is_none() {
            return Err(Error::Config(
                "the weight proposal needs the learned kernel".into(),
            ));
        }

        let (n_c, n_f) = match samples {
            Samples::Jitter { .. } => (nc_total / b.max(1), nf_total / b.max(1)),
            Samples::Fixed { .. } => (nc_total / (nm * b).max(1), nf_total / (nm * b).max(1)),
        };
        let expected = match samples {
            Samples::Jitter { .. } => (b * n_c, b * n_f),
            Samples::Fixed { .. } => (nm * b * n_c, nm * b * n_f),
        };
        if b == 0 || n_c == 0 || n_f == 0 || expected != (nc_total, nf_total) {
            return Err(Error::ShapeMismatch {
                op: "samples",
                lhs: vec![nm, b],
                rhs: vec![nc_total, nf_total],
            });
        }
        let (tn, tf) = (batch.t_near, batch.t_far);

        let tc: Vec<f64> = match samples {
            Samples::Jitter { coarse, .. } => {
                let per_ray: Vec<f64> = coarse
                    .chunks_exact(n_c)
                    .flat_map(|u| stratified_from_u(tn, tf, u))
                    .collect();
                per_ray.repeat(nm)
            }
            Samples::Fixed { coarse, .. } => coarse.clone(),
        };
        let tc = Tensor::new(vec![nm, b, n_c], tc)?;
        let coarse = self.pass(tape, p, &self.coarse, origins, dirs, &tc, tf)?;

        let wc = tape.value(coarse.weights).data().to_vec();
        let mut merged = Vec::with_capacity(nm * b * (n_c + n_f));
        for r in 0..nm * b {
            let t_row = &tc.data()[r * n_c..(r + 1) * n_c];
            let fine_t = match samples {
                Samples::Jitter { fine, .. } => {
                    let xi = &fine[(r % b) * n_f..(r % b + 1) * n_f];
                    hierarchical_from_u(&wc[r * n_c..(r + 1) * n_c], tn, tf, xi)
                }
                Samples::Fixed { fine, .. } => fine[r * n_f..(r + 1) * n_f].to_vec(),
            };
            merged.extend(merge_sorted(t_row, &fine_t));
        }
        let tm = Tensor::new(vec![nm, b, n_c + n_f], merged)?;
        let fine = self.pass(tape, p, &self.fine, origins, dirs, &tm, tf)?;

        let gc = tone_map_tape(tape, coarse.color)?;
        let gf = tone_map_tape(tape, fine.color)?;
        let composite = |tape: &mut Tape, g: Var| match ccw {
            None => tape.reshape(g, vec![b, 3]),
            Some(w) => compose_on_tape(tape, g, w),
        };
        let b_coarse = composite(tape, gc)?;
        let b_fine = composite(tape, gf)?;

        let (b_awp, awp_weights) = if phase.awp {
            let ns = n_c + n_f;
            let zeta = tape.swap_axes(fine.feature, 0, 1)?;
            let delta = permute_01(&fine.delta);
            let de = tape.reshape(fine.dir_enc, vec![nm, b, self.fine.config.dir_dim()])?;
            let de = tape.swap_axes(de, 0, 1)?;
            debug_assert_eq!(tape.shape(zeta)[2], ns);
            let av = self
                .awp
                .forward(tape, p, zeta, &delta, de, latent.expect("checked above"))?;
            (
                Some(compose_on_tape(tape, gf, av.weights)?),
                Some(av.weights),
            )
        } else {
            (None, None)
        };

        let loss = match targets {
            None => None,
            Some(t) => {
                if t.len() != b {
                    return Err(Error::ShapeMismatch {
                        op: "targets",
                        lhs: vec![b, 3],
                        rhs: vec![t.len(), 3],
                    });
                }
                let target = RayBatch::tensor(t);
                let lc = mse_on_tape(tape, b_coarse, &target)?;
                let lf = mse_on_tape(tape, b_fine, &target)?;
                Some(match b_awp {
                    None => tape.add(lc, lf)?,
                    Some(ba) => {
                        let la = mse_on_tape(tape, ba, &target)?;
                        let lf = tape.affine(lf, phase.lambda, 0.0);
                        let la = tape.affine(la, 1.0 - phase.lambda, 0.0);
                        let s = tape.add(lc, lf)?;
                        tape.add(s, la)?
                    }
                })
            }
        };
        Ok(Prediction {
            n_motions: nm,
            coarse: b_coarse,
            fine: b_fine,
            awp: b_awp,
            fine_colors: gf,
            ccw,
            awp_weights,
            loss,
        })
    }

    fn chunked<T>(
        &self,
        batch: &RayBatch,
        chunk: usize,
        mut f: impl FnMut(&mut Tape, &Bound, &RayBatch) -> Result<Vec<T>>,
    ) -> Result<Vec<T>> {
        let mut out = Vec::with_capacity(batch.len());
        let mut start = 0;
        while start < batch.len() {
            let end = (start + chunk).min(batch.len());
            let mut tape = Tape::new();
            let p = self.store.bind(&mut tape, false);
            out.extend(f(&mut tape, &p, &batch.slice(start, end))?);
            start = end;
        }
        Ok(out)
    }

    /// Tonemapped fine-pass colors of the original rays only, at bin midpoints.
    pub fn render_sharp(
        &self,
        batch: &RayBatch,
        n_coarse: usize,
        n_fine: usize,
    ) -> Result<Vec<[f64; 3]>> {
        self.chunked(batch, 256, |tape, p, sub| {
            let s = Samples::midpoints(sub.len(), n_coarse, n_fine);
            let pred = self.forward(tape, p, sub, &s, Phase::plain(), None)?;
            Ok(rows(tape.value(pred.fine)))
        })
    }

    /// Blurred reconstructions at bin midpoints: the kernel-composited fine
    /// color and, when `phase.awp`, the AWP-composited one.
    pub fn render_blurred(
        &self,
        batch: &RayBatch,
        n_coarse: usize,
        n_fine: usize,
        phase: Phase,
    ) -> Result<(Vec<[f64; 3]>, Option<Vec<[f64; 3]>>)> {
        let both = self.chunked(batch, 64, |tape, p, sub| {
            let s = Samples::midpoints(sub.len(), n_coarse, n_fine);
            let pred = self.forward(tape, p, sub, &s, phase, None)?;
            let fine = rows(tape.value(pred.fine));
            let awp = pred.awp.map(|v| rows(tape.value(v)));
            Ok(fine
                .into_iter()
                .enumerate()
                .map(|(i, f)| (f, awp.as_ref().map(|a| a[i])))
                .collect())
        })?;
        let fine = both.iter().map(|x| x.0).collect();
        let awp = if phase.awp {
            Some(both.iter().map(|x| x.1.expect("awp rows")).collect())
        } else {
            None
        };
        Ok((fine, awp))
    }
}

pub(crate) fn rows(t: &Tensor) -> Vec<[f64; 3]> {
    t.data()
        .chunks_exact(3)
        .map(|c| [c[0], c[1], c[2]])
        .collect()
}
