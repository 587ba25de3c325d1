use std::fmt::Write as _;
use std::str::FromStr;

use crate::awp::AwpConfig;
use crate::error::{Error, Result};
use crate::field::FieldConfig;
use crate::rbk::RbkConfig;

/// How the blur kernel takes part in training.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelMode {
    /// Jointly optimized rigid motions and composition weights.
    Learned,
    /// Plain radiance field fit directly to the blurred pixels.
    Disabled,
    /// Identity motions with all weight on the original ray.
    FrozenIdentity,
}

impl KernelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelMode::Learned => "learned",
            KernelMode::Disabled => "disabled",
            KernelMode::FrozenIdentity => "frozen-identity",
        }
    }
}

impl FromStr for KernelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(KernelMode::Learned),
            "disabled" => Ok(KernelMode::Disabled),
            "frozen-identity" => Ok(KernelMode::FrozenIdentity),
            _ => Err(Error::Config(format!("unknown kernel mode `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    /// Rigid motions per image besides the original ray.
    pub k: usize,
    pub batch_rays: usize,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub warmup_iters: usize,
    pub total_iters: usize,
    pub seed: u64,
    pub width: usize,
    pub depth: usize,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub rbk_encoder_width: usize,
    pub rbk_encoder_depth: usize,
    pub rbk_head_width: usize,
    pub awp_embed_dim: usize,
    pub awp_embed_depth: usize,
    pub awp_motion_dim: usize,
    pub awp_attn_dim: usize,
    pub awp_view_hidden: usize,
    pub awp_mam_hidden: usize,
    pub kernel: KernelMode,
    pub awp: bool,
    /// Save a checkpoint every this many iterations; 0 saves only at the end.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let (f, r, a) = (
            FieldConfig::default(),
            RbkConfig::default(),
            AwpConfig::default(),
        );
        TrainConfig {
            k: r.k,
            batch_rays: 1024,
            n_coarse: 64,
            n_fine: 64,
            lr_start: 5e-4,
            lr_end: 8e-5,
            lambda_start: 0.9,
            lambda_end: 0.1,
            warmup_iters: 1200,
            total_iters: 20000,
            seed: 0,
            width: f.width,
            depth: f.depth,
            feature_dim: f.feature_dim,
            latent_dim: r.latent_dim,
            rbk_encoder_width: r.encoder_width,
            rbk_encoder_depth: r.encoder_depth,
            rbk_head_width: r.head_width,
            awp_embed_dim: a.embed_dim,
            awp_embed_depth: a.embed_depth,
            awp_motion_dim: a.motion_dim,
            awp_attn_dim: a.attn_dim,
            awp_view_hidden: a.view_hidden,
            awp_mam_hidden: a.mam_hidden,
            kernel: KernelMode::Learned,
            awp: true,
            checkpoint_every: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

macro_rules! config_keys {
    ($($key:ident),* $(,)?) => {
        /// Every key accepted by [`TrainConfig::set`], in serialization order.
        pub const TRAIN_KEYS: &[&str] = &[$(stringify!($key)),*, "kernel"];

        impl TrainConfig {
            /// Assigns one `key = value` setting.
            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $(stringify!($key) => self.$key = parse(key, value)?,)*
                    "kernel" => self.kernel = value.parse()?,
                    _ => return Err(Error::Config(format!("unknown key `{key}`"))),
                }
                Ok(())
            }

            /// `key = value` lines that [`TrainConfig::from_text`] reads back exactly.
            pub fn to_text(&self) -> String {
                let mut s = String::new();
                $(writeln!(s, "{} = {}", stringify!($key), self.$key).unwrap();)*
                writeln!(s, "kernel = {}", self.kernel.as_str()).unwrap();
                s
            }
        }
    };
}

config_keys!(
    k,
    batch_rays,
    n_coarse,
    n_fine,
    lr_start,
    lr_end,
    lambda_start,
    lambda_end,
    warmup_iters,
    total_iters,
    seed,
    width,
    depth,
    feature_dim,
    latent_dim,
    rbk_encoder_width,
    rbk_encoder_depth,
    rbk_head_width,
    awp_embed_dim,
    awp_embed_depth,
    awp_motion_dim,
    awp_attn_dim,
    awp_view_hidden,
    awp_mam_hidden,
    awp,
    checkpoint_every,
);

/// Splits `key = value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
        out.push((i + 1, k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl TrainConfig {
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        for (line, k, v) in parse_kv(text)? {
            cfg.set(&k, &v)
                .map_err(|e| Error::Config(format!("line {line}: {e}")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0 < self.lambda_end
            && self.lambda_end < self.lambda_start
            && self.lambda_start <= 1.0)
        {
            return bad("need 0 < lambda_end < lambda_start <= 1");
        }
        if self.total_iters > 0 && self.warmup_iters >= self.total_iters {
            return bad("warmup_iters must be below total_iters");
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return bad("learning rates must be positive");
        }
        if self.k == 0 || self.batch_rays == 0 || self.n_coarse == 0 || self.n_fine == 0 {
            return bad("k, batch_rays, n_coarse and n_fine must be positive");
        }
        if self.width == 0 || self.feature_dim == 0 || self.latent_dim == 0 {
            return bad("network widths must be positive");
        }
        Ok(())
    }

    /// Whether iteration `e_c` still fits the plain field to the blurred pixels.
    pub fn in_warmup(&self, e_c: usize) -> bool {
        e_c < self.warmup_iters
    }

    pub fn uses_awp(&self) -> bool {
        self.awp && self.kernel == KernelMode::Learned
    }

    pub fn field_config(&self) -> FieldConfig {
        FieldConfig {
            width: self.width,
            depth: self.depth,
            feature_dim: self.feature_dim,
            ..FieldConfig::default()
        }
    }

    pub fn rbk_config(&self) -> RbkConfig {
        RbkConfig {
            k: self.k,
            latent_dim: self.latent_dim,
            encoder_width: self.rbk_encoder_width,
            encoder_depth: self.rbk_encoder_depth,
            head_width: self.rbk_head_width,
            ..RbkConfig::default()
        }
    }

    pub fn awp_config(&self) -> AwpConfig {
        AwpConfig {
            feature_dim: self.feature_dim,
            embed_dim: self.awp_embed_dim,
            embed_depth: self.awp_embed_depth,
            motion_dim: self.awp_motion_dim,
            attn_dim: self.awp_attn_dim,
            view_hidden: self.awp_view_hidden,
            mam_hidden: self.awp_mam_hidden,
            latent_dim: self.latent_dim,
            ..AwpConfig::default()
        }
    }
}
