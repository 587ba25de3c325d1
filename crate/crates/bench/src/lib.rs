//! Fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sharpfield_core::autodiff::Tensor;
use sharpfield_core::harness::{synthesize, SynthConfig, ToyScene};
use sharpfield_core::train::{TrainConfig, TrainView, Trainer};

pub fn random_tensor(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("sized")
}

/// Blurred desk views at `size` x `size`.
pub fn desk_views(views: usize, size: usize) -> Vec<TrainView> {
    let cfg = SynthConfig {
        views,
        width: size,
        height: size,
        focal: 80.0 * size as f64 / 64.0,
        render_samples: 64,
        ..SynthConfig::default()
    };
    synthesize(&ToyScene::desk(), &cfg)
        .expect("desk synthesizes")
        .views
        .into_iter()
        .map(|v| TrainView {
            camera: v.camera,
            image: v.blurred,
        })
        .collect()
}

/// The desk-scale training setup used by the end-to-end runs.
pub fn desk_config() -> TrainConfig {
    TrainConfig {
        batch_rays: 16,
        n_coarse: 16,
        n_fine: 16,
        warmup_iters: 10,
        total_iters: 1000,
        ..TrainConfig::default()
    }
}

/// A trainer past warmup, so steps run the full kernel and proposal.
pub fn warm_trainer(config: TrainConfig) -> Trainer {
    let warm = config.warmup_iters;
    let mut t = Trainer::new(config, desk_views(5, 16)).expect("valid config");
    for _ in 0..warm {
        t.step().expect("finite");
    }
    t
}
