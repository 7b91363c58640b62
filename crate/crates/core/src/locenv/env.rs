use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locenv::{crop_resize_f32, Action, BBox, DEFAULT_ALPHA, MIN_SIDE};
use crate::synthgen::RgbImage;

/// Per-step episode cap.
pub const MAX_STEPS: usize = 40;

/// Actions remembered in the observation.
pub const HISTORY_LEN: usize = 10;

/// Environment settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub alpha: f64,
    pub max_steps: usize,
    pub min_box: f64,
    pub history_len: usize,
    pub encoder_input_side: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            max_steps: MAX_STEPS,
            min_box: MIN_SIDE,
            history_len: HISTORY_LEN,
            encoder_input_side: 32,
        }
    }
}

/// The most recent actions, newest first, encoded one-hot.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ActionHistory {
    len: usize,
    actions: VecDeque<Action>,
}

impl ActionHistory {
    pub fn new(len: usize) -> Self {
        Self {
            len,
            actions: VecDeque::with_capacity(len),
        }
    }

    pub fn push(&mut self, action: Action) {
        if self.len == 0 {
            return;
        }
        if self.actions.len() == self.len {
            self.actions.pop_back();
        }
        self.actions.push_front(action);
    }

    pub fn dim(&self) -> usize {
        self.len * Action::COUNT
    }

    /// Newest action first; unfilled groups are all zero.
    pub fn actions(&self) -> impl Iterator<Item = Action> + '_ {
        self.actions.iter().copied()
    }

    pub fn write_onehot(&self, out: &mut [f32]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (g, a) in self.actions.iter().enumerate() {
            out[g * Action::COUNT + a.index()] = 1.0;
        }
    }

    pub fn to_vec(&self) -> Vec<f32> {
        let mut v = vec![0.0; self.dim()];
        self.write_onehot(&mut v);
        v
    }
}

/// State of one localization episode over a borrowed image.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvState<'a> {
    pub image: &'a RgbImage,
    pub bbox: BBox,
    pub history: ActionHistory,
    /// Box transformations taken so far; a Trigger is not counted.
    pub step_count: usize,
    pub done: bool,
}

impl<'a> EnvState<'a> {
    /// Fresh episode over the whole image with an all-zero history.
    pub fn reset(image: &'a RgbImage, cfg: &EnvConfig) -> Self {
        Self {
            image,
            bbox: BBox::FULL,
            history: ActionHistory::new(cfg.history_len),
            step_count: 0,
            done: false,
        }
    }

    /// Returns the successor state and whether it is terminal. Trigger ends
    /// the episode in place; any other action transforms the box, and the
    /// episode ends once `max_steps` transformations have been taken.
    pub fn step(&self, action: Action, cfg: &EnvConfig) -> Result<(EnvState<'a>, bool)> {
        if self.done {
            return Err(Error::Contract("step on a finished episode".into()));
        }
        let mut next = self.clone();
        if action == Action::Trigger {
            next.done = true;
            return Ok((next, true));
        }
        next.bbox = self.bbox.apply(action, cfg.alpha, cfg.min_box)?;
        next.history.push(action);
        next.step_count += 1;
        next.done = next.step_count >= cfg.max_steps;
        let terminal = next.done;
        Ok((next, terminal))
    }

    /// Crop of the current box at the encoder's input size, as `(v - 127.5) / 64`.
    pub fn crop_pixels(&self, side: usize) -> Vec<f32> {
        normalized_crop(self.image, &self.bbox, side)
    }
}

/// Bilinear crop with each channel value mapped to `(v - 127.5) / 64`.
pub fn normalized_crop(image: &RgbImage, bbox: &BBox, side: usize) -> Vec<f32> {
    let mut px = crop_resize_f32(image, bbox, side);
    px.iter_mut().for_each(|v| *v = (*v - 127.5) / 64.0);
    px
}

/// Maps crop pixels to a feature vector.
pub trait Encoder {
    fn input_side(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn encode(&self, pixels: &[f32]) -> Vec<f32>;
}

/// Encoder features of the current crop followed by the one-hot action history.
#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub data: Vec<f32>,
    pub feature_dim: usize,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn features(&self) -> &[f32] {
        &self.data[..self.feature_dim]
    }

    pub fn history(&self) -> &[f32] {
        &self.data[self.feature_dim..]
    }
}

pub fn build_observation<E: Encoder + ?Sized>(encoder: &E, state: &EnvState<'_>) -> Observation {
    let mut data = encoder.encode(&state.crop_pixels(encoder.input_side()));
    let feature_dim = data.len();
    debug_assert_eq!(feature_dim, encoder.feature_dim());
    data.extend(state.history.to_vec());
    Observation { data, feature_dim }
}

/// Raw crop pixels (in place of encoder features) followed by the history,
/// for learners that train the encoder from replayed transitions.
pub fn pixel_observation(state: &EnvState<'_>, side: usize) -> Observation {
    let mut data = state.crop_pixels(side);
    let feature_dim = data.len();
    data.extend(state.history.to_vec());
    Observation { data, feature_dim }
}
