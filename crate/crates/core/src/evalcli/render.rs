use std::path::Path;

use crate::error::{Error, Result};
use crate::locenv::BBox;
use crate::pipeline::EpisodeTrace;
use crate::synthgen::RgbImage;

pub const FINAL_COLOR: [u8; 3] = [255, 0, 0];
pub const INTERMEDIATE_COLOR: [u8; 3] = [255, 200, 200];

/// Inclusive pixel rectangle covered by a box, clipped to the canvas.
pub fn box_pixels(bbox: &BBox, width: usize, height: usize) -> (usize, usize, usize, usize) {
    let edge = |lo: f64, hi: f64, n: usize| {
        let a = ((lo * n as f64).floor() as usize).min(n - 1);
        let b = (((hi * n as f64).ceil() as usize).max(1) - 1).clamp(a, n - 1);
        (a, b)
    };
    let (x1, x2) = edge(bbox.x1(), bbox.x2(), width);
    let (y1, y2) = edge(bbox.y1(), bbox.y2(), height);
    (x1, y1, x2, y2)
}

/// Draws a 1-pixel rectangle outline.
pub fn draw_box(image: &mut RgbImage, bbox: &BBox, color: [u8; 3]) {
    if image.width() == 0 || image.height() == 0 {
        return;
    }
    let (x1, y1, x2, y2) = box_pixels(bbox, image.width(), image.height());
    for x in x1..=x2 {
        image.put(x, y1, color);
        image.put(x, y2, color);
    }
    for y in y1..=y2 {
        image.put(x1, y, color);
        image.put(x2, y, color);
    }
}

/// Scene with every intermediate box in a light color and the final box on top in red.
pub fn annotate_trace(image: &RgbImage, trace: &EpisodeTrace) -> Result<RgbImage> {
    let (last, rest) = trace
        .steps
        .split_last()
        .ok_or_else(|| Error::InvalidArgument("cannot render an empty trace".into()))?;
    let mut out = image.clone();
    for s in rest {
        draw_box(&mut out, &s.bbox, INTERMEDIATE_COLOR);
    }
    draw_box(&mut out, &last.bbox, FINAL_COLOR);
    Ok(out)
}

pub fn render_trace(image: &RgbImage, trace: &EpisodeTrace, out: &Path) -> Result<()> {
    let annotated = annotate_trace(image, trace)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    annotated.write_ppm(out)
}
