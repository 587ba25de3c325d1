//! The sharp radiance field: encoding, network, ray sampling, volume
//! rendering and tone mapping.

mod encoding;
mod network;
mod ray;
mod render;
mod sampling;
mod tonemap;

pub use encoding::{positional_encode, DIR_FREQS, POS_FREQS};
pub use network::{Field, FieldConfig, FieldOutput, FieldVars};
pub use ray::Ray;
pub use render::{deltas, render_on_tape, volume_render, RenderResult};
pub use sampling::{
    hierarchical_from_u, hierarchical_sample, merge_sorted, stratified_from_u, stratified_sample,
    PDF_FLOOR,
};
pub use tonemap::{tone_map, tone_map_tape, GAMMA};
