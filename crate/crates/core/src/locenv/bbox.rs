//! Normalized axis-aligned boxes and the box-transformation actions.
//!
//! Coordinates are held as integers on a 2⁻²⁰ lattice of the unit square.
//! Every transform is integer arithmetic, so a translation followed by its
//! opposite restores the original box bit-for-bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lattice points per unit length.
pub const LATTICE: i64 = 1 << 20;

/// Minimum box side (normalized).
pub const MIN_SIDE: f64 = 0.05;

/// Step size of every transformation, as a fraction of the current box dimension.
pub const DEFAULT_ALPHA: f64 = 0.2;

fn to_units(v: f64) -> i64 {
    (v * LATTICE as f64).round() as i64
}

fn min_units(min_side: f64) -> i64 {
    (min_side * LATTICE as f64).floor() as i64
}

/// Axis-aligned rectangle in normalized image coordinates, `y` pointing down.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct BBox {
    x1: i64,
    y1: i64,
    x2: i64,
    y2: i64,
}

impl BBox {
    /// The whole image.
    pub const FULL: BBox = BBox {
        x1: 0,
        y1: 0,
        x2: LATTICE,
        y2: LATTICE,
    };

    /// Snaps the corners onto the lattice and checks the box invariants
    /// (ordered corners, inside the unit square, sides ≥ [`MIN_SIDE`]).
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        Self::with_min_side(x1, y1, x2, y2, MIN_SIDE)
    }

    pub fn with_min_side(x1: f64, y1: f64, x2: f64, y2: f64, min_side: f64) -> Result<Self> {
        if ![x1, y1, x2, y2].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite box ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        let b = BBox {
            x1: to_units(x1),
            y1: to_units(y1),
            x2: to_units(x2),
            y2: to_units(y2),
        };
        if !b.is_valid(min_side) {
            return Err(Error::InvalidArgument(format!(
                "invalid box ({x1}, {y1}, {x2}, {y2})"
            )));
        }
        Ok(b)
    }

    /// Builds a box from integer pixel edges `[x1, x2) × [y1, y2)` of a
    /// `side × side` raster.
    pub fn from_pixels(x1: usize, y1: usize, x2: usize, y2: usize, side: usize) -> Result<Self> {
        let s = side as f64;
        Self::with_min_side(x1 as f64 / s, y1 as f64 / s, x2 as f64 / s, y2 as f64 / s, 0.0)
    }

    pub fn is_valid(&self, min_side: f64) -> bool {
        let m = min_units(min_side).max(1);
        0 <= self.x1
            && 0 <= self.y1
            && self.x2 <= LATTICE
            && self.y2 <= LATTICE
            && self.x2 - self.x1 >= m
            && self.y2 - self.y1 >= m
    }

    pub fn x1(&self) -> f64 {
        self.x1 as f64 / LATTICE as f64
    }
    pub fn y1(&self) -> f64 {
        self.y1 as f64 / LATTICE as f64
    }
    pub fn x2(&self) -> f64 {
        self.x2 as f64 / LATTICE as f64
    }
    pub fn y2(&self) -> f64 {
        self.y2 as f64 / LATTICE as f64
    }
    pub fn width(&self) -> f64 {
        (self.x2 - self.x1) as f64 / LATTICE as f64
    }
    pub fn height(&self) -> f64 {
        (self.y2 - self.y1) as f64 / LATTICE as f64
    }
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
    pub fn center(&self) -> (f64, f64) {
        ((self.x1() + self.x2()) / 2.0, (self.y1() + self.y2()) / 2.0)
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1(), self.y1(), self.x2(), self.y2()]
    }

    /// Box of the same content after rotating the image clockwise by `k·90°`.
    pub fn rotate_90k(&self, k: u8) -> BBox {
        let mut b = *self;
        for _ in 0..(k % 4) {
            b = BBox {
                x1: LATTICE - b.y2,
                y1: b.x1,
                x2: LATTICE - b.y1,
                y2: b.x2,
            };
        }
        b
    }

    /// Applies one transformation. `Trigger` is not a transformation and is rejected.
    pub fn apply(&self, action: Action, alpha: f64, min_side: f64) -> Result<BBox> {
        let (w, h) = (self.x2 - self.x1, self.y2 - self.y1);
        let step = |d: i64| (alpha * d as f64).round() as i64;
        let shrink = |d: i64| ((1.0 - alpha) * d as f64).round() as i64;
        let floor = min_units(min_side).max(1);
        let mut b = *self;
        match action {
            Action::MoveLeft => {
                b.x1 = (self.x1 - step(w)).max(0);
                b.x2 = b.x1 + w;
            }
            Action::MoveRight => {
                b.x1 = (self.x1 + step(w)).min(LATTICE - w);
                b.x2 = b.x1 + w;
            }
            Action::MoveUp => {
                b.y1 = (self.y1 - step(h)).max(0);
                b.y2 = b.y1 + h;
            }
            Action::MoveDown => {
                b.y1 = (self.y1 + step(h)).min(LATTICE - h);
                b.y2 = b.y1 + h;
            }
            Action::ScaleUp => {
                let (nw, nh) = (w + step(w), h + step(h));
                b.x1 = (self.x1 - (nw - w) / 2).max(0);
                b.x2 = (self.x1 - (nw - w) / 2 + nw).min(LATTICE);
                b.y1 = (self.y1 - (nh - h) / 2).max(0);
                b.y2 = (self.y1 - (nh - h) / 2 + nh).min(LATTICE);
            }
            Action::ScaleDown => {
                (b.x1, b.x2) = shrink_about_center(self.x1, w, shrink(w), floor);
                (b.y1, b.y2) = shrink_about_center(self.y1, h, shrink(h), floor);
            }
            Action::Fatter => {
                (b.y1, b.y2) = shrink_about_center(self.y1, h, shrink(h), floor);
            }
            Action::Taller => {
                (b.x1, b.x2) = shrink_about_center(self.x1, w, shrink(w), floor);
            }
            Action::Trigger => {
                return Err(Error::Contract("Trigger does not transform a box".into()));
            }
        }
        debug_assert!(b.is_valid(0.0));
        Ok(b)
    }
}

fn shrink_about_center(start: i64, len: i64, target: i64, floor: i64) -> (i64, i64) {
    let new = target.max(floor).min(len);
    let s = start + (len - new) / 2;
    (s, s + new)
}

impl Serialize for BBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_array().serialize(s)
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[f64; 4]>::deserialize(d)?;
        BBox::with_min_side(x1, y1, x2, y2, 0.0).map_err(serde::de::Error::custom)
    }
}

/// Intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0) as f64;
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0) as f64;
    let inter = iw * ih;
    let area = |r: &BBox| ((r.x2 - r.x1) as f64) * ((r.y2 - r.y1) as f64);
    inter / (area(a) + area(b) - inter)
}

/// The nine agent actions, with stable integer encoding `0..=8` in this order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    MoveLeft,
    MoveRight,
    MoveUp,
    MoveDown,
    ScaleUp,
    ScaleDown,
    Fatter,
    Taller,
    Trigger,
}

impl Action {
    pub const COUNT: usize = 9;

    pub const ALL: [Action; 9] = [
        Action::MoveLeft,
        Action::MoveRight,
        Action::MoveUp,
        Action::MoveDown,
        Action::ScaleUp,
        Action::ScaleDown,
        Action::Fatter,
        Action::Taller,
        Action::Trigger,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Self::ALL.get(i).copied()
    }
}
