use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{derive_seed, SplitMix64};

/// Side of a glyph bitmap in cells.
pub const GLYPH_SIDE: usize = 8;

/// Number of glyph families a template can be drawn from.
pub const PATTERN_FAMILIES: u8 = 4;

/// Synthetic stand-in for a brand logo: a binary glyph in a foreground color.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LogoTemplate {
    pub class_id: usize,
    /// Row-major `GLYPH_SIDE × GLYPH_SIDE` mask. Every border row and column
    /// holds at least one set cell, so the glyph's tight box is its full square.
    pub glyph: Vec<bool>,
    pub color: [u8; 3],
    pub pattern_id: u8,
}

impl LogoTemplate {
    pub fn cell(&self, x: usize, y: usize) -> bool {
        self.glyph[y * GLYPH_SIDE + x]
    }

    pub fn class_name(&self) -> String {
        class_name(self.class_id)
    }
}

pub fn class_name(class_id: usize) -> String {
    format!("brand-{class_id:02}")
}

/// Solid-rectangle mask at glyph resolution (the shape of rectangle distractors).
pub fn solid_mask() -> Vec<bool> {
    vec![true; GLYPH_SIDE * GLYPH_SIDE]
}

/// Inscribed-ellipse mask at glyph resolution (the shape of ellipse distractors).
pub fn ellipse_mask() -> Vec<bool> {
    let r = GLYPH_SIDE as f64 / 2.0;
    (0..GLYPH_SIDE * GLYPH_SIDE)
        .map(|i| {
            let (x, y) = ((i % GLYPH_SIDE) as f64 + 0.5 - r, (i / GLYPH_SIDE) as f64 + 0.5 - r);
            (x * x + y * y) / (r * r) <= 1.0
        })
        .collect()
}

/// Deterministically builds one pairwise-distinct template per class.
pub fn make_templates(num_classes: usize, seed: u64) -> Result<Vec<LogoTemplate>> {
    if !(2..=64).contains(&num_classes) {
        return Err(Error::InvalidArgument(format!(
            "num_classes must be in [2, 64], got {num_classes}"
        )));
    }
    let mut rng = SplitMix64::new(derive_seed(seed, 0x7E4D, 0));
    let hue_offset: f64 = rng.gen();
    let forbidden = [solid_mask(), ellipse_mask()];
    let mut templates: Vec<LogoTemplate> = Vec::with_capacity(num_classes);
    for class_id in 0..num_classes {
        let pattern_id = (class_id % PATTERN_FAMILIES as usize) as u8;
        let glyph = loop {
            let g = draw_glyph(pattern_id, &mut rng);
            if !forbidden.contains(&g) && templates.iter().all(|t| t.glyph != g) {
                break g;
            }
        };
        let hue = (class_id as f64 / num_classes as f64 + hue_offset).fract();
        let saturation = rng.gen_range(0.75..1.0);
        let value = rng.gen_range(0.85..1.0);
        templates.push(LogoTemplate {
            class_id,
            glyph,
            color: hsv_to_rgb(hue, saturation, value),
            pattern_id,
        });
    }
    Ok(templates)
}

fn draw_glyph(family: u8, rng: &mut SplitMix64) -> Vec<bool> {
    let n = GLYPH_SIDE;
    let mut g = vec![false; n * n];
    match family {
        // mirror-symmetric speckle
        0 => {
            for y in 0..n {
                for x in 0..n / 2 {
                    let on = rng.gen_bool(0.55);
                    g[y * n + x] = on;
                    g[y * n + n - 1 - x] = on;
                }
            }
        }
        // coarse 2×2 blocks
        1 => {
            for by in 0..n / 2 {
                for bx in 0..n / 2 {
                    if rng.gen_bool(0.55) {
                        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            g[(2 * by + dy) * n + 2 * bx + dx] = true;
                        }
                    }
                }
            }
        }
        // ring with a random interior
        2 => {
            for y in 0..n {
                for x in 0..n {
                    let border = x == 0 || y == 0 || x == n - 1 || y == n - 1;
                    g[y * n + x] = border || (x > 1 && y > 1 && x < n - 2 && y < n - 2 && rng.gen_bool(0.5));
                }
            }
        }
        // horizontal bars of random extent
        _ => {
            for y in 0..n {
                if y % 2 == 0 || rng.gen_bool(0.3) {
                    let a = rng.gen_range(0..n / 2);
                    let b = rng.gen_range(n / 2..n);
                    for x in a..=b {
                        g[y * n + x] = true;
                    }
                }
            }
        }
    }
    // every border line must be touched so the tight box is the full square
    for i in 0..4 {
        let line: Vec<usize> = (0..n)
            .map(|j| match i {
                0 => j,
                1 => (n - 1) * n + j,
                2 => j * n,
                _ => j * n + n - 1,
            })
            .collect();
        if !line.iter().any(|&c| g[c]) {
            g[line[rng.gen_range(0..n)]] = true;
        }
    }
    g
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h6 = h * 6.0;
    let sector = h6.floor() as i64 % 6;
    let f = h6 - h6.floor();
    let (p, q, t) = (v * (1.0 - s), v * (1.0 - s * f), v * (1.0 - s * (1.0 - f)));
    let (r, g, b) = match sector {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8)
}
