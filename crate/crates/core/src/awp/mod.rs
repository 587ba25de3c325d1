//! Adaptive weight proposal: per-pixel composition weights refined from the
//! depth features of every motion's samples.

mod mam;
mod modulation;

use rand_chacha::ChaCha8Rng;

pub use mam::{AttentivePool, Mam, MamDims};
pub use modulation::feature_modulation;

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::Result;
use crate::nn::{normalized_sigmoid, Bound, Linear, Mlp, ParamStore};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AwpConfig {
    /// Channels of the incoming depth features.
    pub feature_dim: usize,
    pub embed_dim: usize,
    pub embed_depth: usize,
    pub motion_dim: usize,
    pub attn_dim: usize,
    pub view_hidden: usize,
    pub mam_hidden: usize,
    pub latent_dim: usize,
    pub dir_freqs: usize,
}

impl Default for AwpConfig {
    fn default() -> Self {
        AwpConfig {
            feature_dim: 128,
            embed_dim: 64,
            embed_depth: 4,
            motion_dim: 32,
            attn_dim: 16,
            view_hidden: 32,
            mam_hidden: 64,
            latent_dim: 64,
            dir_freqs: crate::field::DIR_FREQS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Awp {
    pub config: AwpConfig,
    pub embed: Mlp,
    pub view: Mlp,
    pub mam: Mam,
    pub score: Linear,
}

/// Intermediate tensors of one proposal, all batched over pixels.
#[derive(Clone, Copy, Debug)]
pub struct AwpVars {
    pub zeta_hat: Var,
    pub eta: Var,
    pub eta_hat: Var,
    pub eta_tilde: Var,
    pub weights: Var,
}

impl Awp {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        config: AwpConfig,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let mut widths = vec![config.feature_dim];
        widths.extend(std::iter::repeat(config.embed_dim).take(config.embed_depth));
        let embed = Mlp::new(store, &format!("{name}.embed"), &widths, true, rng);
        let view_in = config.embed_dim + 3 + 6 * config.dir_freqs + config.latent_dim;
        let view = Mlp::new(
            store,
            &format!("{name}.view"),
            &[view_in, config.view_hidden, config.motion_dim],
            false,
            rng,
        );
        let mam = Mam::new(
            store,
            &format!("{name}.mam"),
            MamDims {
                input: config.embed_dim,
                motion: config.motion_dim,
                attn: config.attn_dim,
                hidden: config.mam_hidden,
            },
            rng,
        );
        let score = Linear::new(store, &format!("{name}.score"), 1, 1, rng);
        Awp {
            config,
            embed,
            view,
            mam,
            score,
        }
    }

    /// `[..., feature_dim]` -> `[..., embed_dim]`, relu after every layer.
    pub fn embed_depth_features(&self, tape: &mut Tape, p: &Bound, zeta: Var) -> Result<Var> {
        self.embed.forward(tape, p, zeta)
    }

    /// Concatenates `eta [B, N_m, C]`, encoded directions `[B, N_m, D]` and the
    /// image latent `[B, L]`, then maps each motion row to `motion_dim`.
    pub fn view_condition(
        &self,
        tape: &mut Tape,
        p: &Bound,
        eta: Var,
        dir_enc: Var,
        latent: Var,
    ) -> Result<Var> {
        let (b, nm) = (tape.shape(eta)[0], tape.shape(eta)[1]);
        let l = tape.shape(latent)[1];
        let lr = tape.reshape(latent, vec![b, 1, l])?;
        let lb = tape.broadcast_to(lr, &[b, nm, l])?;
        let cat = tape.concat(&[eta, dir_enc, lb], 2)?;
        self.view.forward(tape, p, cat)
    }

    /// Channel-average per motion, shared scalar affine map, sigmoid, then
    /// normalization over motions. `[B, N_m, C]` -> `[B, N_m]`.
    pub fn propose_weights(&self, tape: &mut Tape, p: &Bound, eta_tilde: Var) -> Result<Var> {
        let gap = tape.mean_axis(eta_tilde, 2, true)?;
        let s = self.score.forward(tape, p, gap)?;
        let shape = tape.shape(s)[..2].to_vec();
        let s = tape.reshape(s, shape)?;
        normalized_sigmoid(tape, s)
    }

    /// Full proposal from fine-pass features `zeta [B, N_m, N_s, C]`, spacings
    /// `delta [B, N_m, N_s]`, encoded directions `[B, N_m, D]` and latents `[B, L]`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        p: &Bound,
        zeta: Var,
        delta: &Tensor,
        dir_enc: Var,
        latent: Var,
    ) -> Result<AwpVars> {
        let zeta_hat = self.embed_depth_features(tape, p, zeta)?;
        let eta = feature_modulation(tape, zeta_hat, delta)?;
        let eta_hat = self.view_condition(tape, p, eta, dir_enc, latent)?;
        let eta_tilde = self.mam.forward(tape, p, zeta_hat, eta_hat)?;
        let weights = self.propose_weights(tape, p, eta_tilde)?;
        Ok(AwpVars {
            zeta_hat,
            eta,
            eta_hat,
            eta_tilde,
            weights,
        })
    }
}

#[cfg(test)]
mod tests;
