use std::path::{Path, PathBuf};
use std::str::FromStr;

use sharpfield_core::harness::{BlurKind, SynthConfig, ToyScene};
use sharpfield_core::train::{parse_kv, TrainConfig, TRAIN_KEYS};

use crate::error::CliError;

/// Camera path for `render` when no pose file is given.
#[derive(Clone, Debug, PartialEq)]
pub struct SpiralConfig {
    pub frames: usize,
    /// Circle radius around the mean training camera.
    pub radius: f64,
    /// Amplitude of the back-and-forth motion along the viewing axis.
    pub depth: f64,
    pub turns: f64,
    /// Distance from the mean camera to the point it looks at; 0 uses the
    /// mean camera distance from the world origin.
    pub look_distance: f64,
}

impl Default for SpiralConfig {
    fn default() -> Self {
        SpiralConfig {
            frames: 30,
            radius: 0.15,
            depth: 0.1,
            turns: 1.0,
            look_distance: 0.0,
        }
    }
}

/// Everything a subcommand can read from a `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub synth: SynthConfig,
    pub scene: String,
    pub dataset: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub spiral: SpiralConfig,
    pub poses: Option<PathBuf>,
    /// Pixel stride of the AWP weight dump.
    pub inspect_grid: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            synth: SynthConfig::default(),
            scene: "desk".into(),
            dataset: None,
            checkpoint: None,
            spiral: SpiralConfig::default(),
            poses: None,
            inspect_grid: 16,
        }
    }
}

pub const SYNTH_KEYS: &[&str] = &[
    "views",
    "width",
    "height",
    "focal",
    "distance",
    "elevation",
    "spread",
    "t_near",
    "t_far",
    "blur",
    "motion_samples",
    "motion_rotation",
    "motion_translation",
    "aperture",
    "defocus_samples",
    "render_samples",
    "seed",
];

pub const RENDER_KEYS: &[&str] = &[
    "frames",
    "radius",
    "depth",
    "turns",
    "look_distance",
    "poses",
];

fn value<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("bad value `{v}` for `{key}`"))
}

pub fn parse_blur(v: &str) -> Result<BlurKind, String> {
    match v {
        "motion" => Ok(BlurKind::Motion),
        "defocus" => Ok(BlurKind::Defocus),
        _ => Err(format!("unknown blur kind `{v}` (motion or defocus)")),
    }
}

fn set_synth(s: &mut SynthConfig, key: &str, v: &str) -> Result<(), String> {
    match key {
        "views" => s.views = value(key, v)?,
        "width" => s.width = value(key, v)?,
        "height" => s.height = value(key, v)?,
        "focal" => s.focal = value(key, v)?,
        "distance" => s.distance = value(key, v)?,
        "elevation" => s.elevation = value(key, v)?,
        "spread" => s.spread = value(key, v)?,
        "t_near" => s.t_near = value(key, v)?,
        "t_far" => s.t_far = value(key, v)?,
        "blur" => s.blur = parse_blur(v)?,
        "motion_samples" => s.motion_samples = value(key, v)?,
        "motion_rotation" => s.motion_rotation = value(key, v)?,
        "motion_translation" => s.motion_translation = value(key, v)?,
        "aperture" => s.aperture = value(key, v)?,
        "defocus_samples" => s.defocus_samples = value(key, v)?,
        "render_samples" => s.render_samples = value(key, v)?,
        "seed" => s.seed = value(key, v)?,
        _ => return Err(format!("unknown key `synth.{key}`")),
    }
    Ok(())
}

impl RunConfig {
    /// Parses config text; relative paths resolve against `base`.
    pub fn from_text(text: &str, base: &Path, origin: &Path) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        let at = |line: usize, msg: String| {
            CliError::User(format!("{}:{line}: {msg}", origin.display()))
        };
        let entries =
            parse_kv(text).map_err(|e| CliError::User(format!("{}: {e}", origin.display())))?;
        for (line, key, v) in entries {
            let v = v.as_str();
            let res: Result<(), String> = if let Some(k) = key.strip_prefix("synth.") {
                set_synth(&mut c.synth, k, v)
            } else if let Some(k) = key.strip_prefix("render.") {
                match k {
                    "frames" => value(&key, v).map(|x| c.spiral.frames = x),
                    "radius" => value(&key, v).map(|x| c.spiral.radius = x),
                    "depth" => value(&key, v).map(|x| c.spiral.depth = x),
                    "turns" => value(&key, v).map(|x| c.spiral.turns = x),
                    "look_distance" => value(&key, v).map(|x| c.spiral.look_distance = x),
                    "poses" => {
                        c.poses = Some(base.join(v));
                        Ok(())
                    }
                    _ => Err(format!("unknown key `{key}`")),
                }
            } else {
                match key.as_str() {
                    "scene" => {
                        c.scene = v.to_string();
                        Ok(())
                    }
                    "dataset" => {
                        c.dataset = Some(base.join(v));
                        Ok(())
                    }
                    "checkpoint" => {
                        c.checkpoint = Some(base.join(v));
                        Ok(())
                    }
                    "inspect.grid" => value(&key, v).map(|x| c.inspect_grid = x),
                    k if TRAIN_KEYS.contains(&k) => c.train.set(k, v).map_err(|e| e.to_string()),
                    _ => Err(format!("unknown key `{key}`")),
                }
            };
            res.map_err(|m| at(line, m))?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        RunConfig::from_text(&text, base, path)
    }

    pub fn scene(&self) -> Result<ToyScene, CliError> {
        match self.scene.as_str() {
            "desk" => Ok(ToyScene::desk()),
            "empty" => Ok(ToyScene::empty()),
            s => Err(CliError::User(format!(
                "unknown scene `{s}` (desk or empty)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.synth;
        let bad = |m: &str| Err(CliError::User(format!("invalid configuration: {m}")));
        if s.views == 0 || s.width == 0 || s.height == 0 {
            return bad("synth.views, synth.width and synth.height must be >= 1");
        }
        if !(s.focal > 0.0) || !(s.distance > 0.0) {
            return bad("synth.focal and synth.distance must be > 0");
        }
        if !(0.0 <= s.t_near && s.t_near < s.t_far) {
            return bad("need 0 <= synth.t_near < synth.t_far");
        }
        if s.motion_samples == 0 || s.defocus_samples == 0 || s.render_samples == 0 {
            return bad("sample counts must be >= 1");
        }
        if !(s.aperture >= 0.0) || !(s.motion_rotation >= 0.0) || !(s.motion_translation >= 0.0) {
            return bad("blur magnitudes must be >= 0");
        }
        if ![s.elevation, s.spread].iter().all(|x| x.is_finite())
            || s.elevation.abs() >= std::f64::consts::FRAC_PI_2
        {
            return bad("synth.elevation must lie strictly between -pi/2 and pi/2");
        }
        let r = &self.spiral;
        if ![r.radius, r.depth, r.turns, r.look_distance]
            .iter()
            .all(|x| x.is_finite())
            || r.look_distance < 0.0
        {
            return bad("render.* values must be finite, look_distance >= 0");
        }
        if self.inspect_grid == 0 {
            return bad("inspect.grid must be >= 1");
        }
        self.scene()?;
        Ok(())
    }
}
