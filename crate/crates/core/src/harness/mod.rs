//! Ground truth for the deblurring pipeline: analytic scenes, a pinhole and
//! thin-lens camera, blur synthesis, image containers, metrics and the
//! on-disk dataset layout.

mod blur;
mod camera;
mod dataset;
mod image;
mod metrics;
mod scene;
mod synth;

pub use blur::{
    aperture_pattern, concentric_disk, motion_path, render_irradiance, render_sharp,
    synthesize_defocus_blur, synthesize_motion_blur, BlurSpec, SHARP_SAMPLES,
};
pub use camera::Camera;
pub use dataset::{export_dataset, read_cameras, write_cameras, Access, Dataset, View};
pub use image::Image;
pub use metrics::{error_map, psnr, ssim, ErrorMap};
pub use scene::{Primitive, Shape, ToyScene};
pub use synth::{synthesize, BlurKind, SynthConfig, Synthesized};
