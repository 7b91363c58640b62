//! Deterministic synthetic logo scenes.
//!
//! A scene is a noisy, cluttered background with one glyph-style logo
//! composited at a random scale, position and quarter-turn rotation. The
//! generator is a pure function of its parameters and seed.

mod dataset;
mod image;
mod scene;
mod template;

pub use dataset::{
    generate_dataset, DatasetInfo, DatasetManifest, GenConfig, ManifestRecord, Split,
    INFO_FILE,
};
pub use image::{rotate_90k, rotate_mask_90k, RgbImage};
pub use scene::{render_scene, sample_placement, tight_box, BackgroundParams, Placement, Scene};
pub use template::{
    class_name, ellipse_mask, make_templates, solid_mask, LogoTemplate, GLYPH_SIDE, PATTERN_FAMILIES,
};
