use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::nn::{Bound, Linear, Mlp, ParamStore};

/// Softmax-weighted sum along one axis, scored by a learned linear map to a
/// single channel.
#[derive(Clone, Debug)]
pub struct AttentivePool {
    pub scorer: Linear,
}

impl AttentivePool {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        AttentivePool {
            scorer: Linear::new(store, name, channels, 1, rng),
        }
    }

    /// Pools `x [..., C]` over `axis`, which must not be the channel axis.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var, axis: usize) -> Result<Var> {
        let scores = self.scorer.forward(tape, p, x)?;
        let w = tape.softmax_axis(scores, axis)?;
        let weighted = tape.mul(w, x)?;
        tape.sum_axis(weighted, axis, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MamDims {
    /// Channels of the embedded depth features.
    pub input: usize,
    /// Channels of the conditioned motion features (and of the output).
    pub motion: usize,
    /// Channels of the correlation space.
    pub attn: usize,
    pub hidden: usize,
}

/// Motion aggregation: correlates each motion's conditioned feature with
/// per-sample and per-motion summaries of the depth features, then adds the
/// aggregated result back residually.
#[derive(Clone, Debug)]
pub struct Mam {
    pub dims: MamDims,
    pub embed: Linear,
    pub pool_motion: AttentivePool,
    pub pool_sample: AttentivePool,
    pub proj_sample: Linear,
    pub proj_motion: Linear,
    pub proj_query: Linear,
    pub out: Mlp,
}

impl Mam {
    pub fn new(store: &mut ParamStore, name: &str, dims: MamDims, rng: &mut ChaCha8Rng) -> Self {
        let e = dims.motion;
        Mam {
            dims,
            embed: Linear::new(store, &format!("{name}.embed"), dims.input, e, rng),
            pool_motion: AttentivePool::new(store, &format!("{name}.pool_motion"), e, rng),
            pool_sample: AttentivePool::new(store, &format!("{name}.pool_sample"), e, rng),
            proj_sample: Linear::new(store, &format!("{name}.proj_sample"), e, dims.attn, rng),
            proj_motion: Linear::new(store, &format!("{name}.proj_motion"), e, dims.attn, rng),
            proj_query: Linear::new(
                store,
                &format!("{name}.proj_query"),
                dims.motion,
                dims.attn,
                rng,
            ),
            out: Mlp::new(
                store,
                &format!("{name}.out"),
                &[2 * dims.attn, dims.hidden, dims.motion],
                false,
                rng,
            ),
        }
    }

    /// `zeta_hat [B, N_m, N_s, input]`, `eta_hat [B, N_m, motion]` -> `[B, N_m, motion]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, zeta_hat: Var, eta_hat: Var) -> Result<Var> {
        let e = self.embed.forward(tape, p, zeta_hat)?;
        let e = tape.relu(e);
        // Pooling across motions summarizes each sample; across samples, each motion.
        let xi_sample = self.pool_motion.forward(tape, p, e, 1)?;
        let xi_motion = self.pool_sample.forward(tape, p, e, 2)?;
        let zs = self.proj_sample.forward(tape, p, xi_sample)?;
        let zm = self.proj_motion.forward(tape, p, xi_motion)?;
        let q = self.proj_query.forward(tape, p, eta_hat)?;

        let zs_t = tape.swap_axes(zs, 1, 2)?;
        let corr_s = tape.matmul(q, zs_t)?;
        let corr_s = tape.softmax_axis(corr_s, 2)?;
        let agg_s = tape.matmul(corr_s, zs)?;

        let zm_t = tape.swap_axes(zm, 1, 2)?;
        let corr_m = tape.matmul(q, zm_t)?;
        let corr_m = tape.softmax_axis(corr_m, 2)?;
        let agg_m = tape.matmul(corr_m, zm)?;

        let cat = tape.concat(&[agg_s, agg_m], 2)?;
        let h = self.out.forward(tape, p, cat)?;
        tape.add(h, eta_hat)
    }
}
