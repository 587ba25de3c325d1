//! Joint optimization of the radiance field, blur kernel and weight
//! proposal.

mod adam;
mod config;
mod loss;
mod model;
mod schedule;
mod trainer;

pub use adam::Adam;
pub use config::{parse_kv, KernelMode, TrainConfig, TRAIN_KEYS};
pub use loss::{mse_on_tape, reconstruction_loss};
pub use model::{Model, Phase, Prediction, RayBatch, Samples};
pub use schedule::{lambda_schedule, lr_schedule};
pub use trainer::{
    camera_batch, render_image, save_checkpoint, Checkpoint, StepRecord, TrainView, Trainer,
    LOG_HEADER,
};
