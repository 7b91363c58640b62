//! The bounding-box decision process: boxes, the nine actions, episode
//! stepping and observation construction.

mod bbox;
mod crop;
mod env;

pub use bbox::{iou, Action, BBox, DEFAULT_ALPHA, LATTICE, MIN_SIDE};
pub use crop::{crop_resize, crop_resize_f32};
pub use env::{
    build_observation, normalized_crop, pixel_observation, ActionHistory, Encoder, EnvConfig, EnvState, Observation, HISTORY_LEN, MAX_STEPS,
};
