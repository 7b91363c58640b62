use crate::locenv::BBox;
use crate::synthgen::RgbImage;

/// Bilinear resample of `bbox` to an `out_side × out_side` grid, returned as
/// interleaved RGB floats in `[0, 255]`.
///
/// Output pixel centers are mapped onto the source region with half-pixel
/// alignment; samples outside the raster clamp to the edge.
pub fn crop_resize_f32(image: &RgbImage, bbox: &BBox, out_side: usize) -> Vec<f32> {
    let (w, h) = (image.width(), image.height());
    let sx = bbox.width() * w as f64 / out_side as f64;
    let sy = bbox.height() * h as f64 / out_side as f64;
    let ox = bbox.x1() * w as f64;
    let oy = bbox.y1() * h as f64;
    let raw = image.as_raw();
    let mut out = Vec::with_capacity(out_side * out_side * 3);
    let axis = |o: f64, s: f64, i: usize, n: usize| {
        let p = (o + (i as f64 + 0.5) * s - 0.5).clamp(0.0, (n - 1) as f64);
        let lo = p.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        (lo, hi, p - lo as f64)
    };
    let cols: Vec<(usize, usize, f64)> = (0..out_side).map(|j| axis(ox, sx, j, w)).collect();
    for i in 0..out_side {
        let (y0, y1, fy) = axis(oy, sy, i, h);
        for &(x0, x1, fx) in &cols {
            for c in 0..3 {
                let at = |x: usize, y: usize| raw[(y * w + x) * 3 + c] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                out.push((top * (1.0 - fy) + bottom * fy) as f32);
            }
        }
    }
    out
}

/// [`crop_resize_f32`] rounded back to an 8-bit raster.
pub fn crop_resize(image: &RgbImage, bbox: &BBox, out_side: usize) -> RgbImage {
    let data = crop_resize_f32(image, bbox, out_side)
        .into_iter()
        .map(|v| v.round().clamp(0.0, 255.0) as u8)
        .collect();
    RgbImage::from_raw(out_side, out_side, data).expect("crop has out_side² pixels")
}
