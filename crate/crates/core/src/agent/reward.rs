//! Reward signals for box transformations.
//!
//! The confidence-guided signal needs only the class label: each
//! transformation is rewarded by the sign of the change in the softmax
//! confidence of the true class, and the Trigger by whether the final
//! confidence clears a threshold. The IoU signal is the annotated baseline
//! and needs the ground-truth box.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::locenv::{iou, BBox};
use crate::numkit::softmax;

/// Terminal reward magnitude.
pub const ETA: f32 = 2.0;
/// Minimum final confidence for a positive terminal reward.
pub const TAU: f64 = 0.75;
/// IoU at which the baseline's terminal reward turns positive.
pub const IOU_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardParams {
    pub eta: f32,
    pub tau: f64,
    pub gamma: f32,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            eta: ETA,
            tau: TAU,
            gamma: 0.9,
        }
    }
}

impl RewardParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.tau > 0.0 && self.tau < 1.0 && (0.0..1.0).contains(&self.gamma)) {
            return Err(Error::Config(format!(
                "reward params need eta > 0, tau in (0,1), gamma in [0,1): {self:?}"
            )));
        }
        Ok(())
    }
}

/// Which reward signal drives training.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Confidence,
    Iou,
}

impl RewardKind {
    pub fn name(self) -> &'static str {
        match self {
            RewardKind::Confidence => "confidence",
            RewardKind::Iou => "iou",
        }
    }
}

impl std::str::FromStr for RewardKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "confidence" => Ok(RewardKind::Confidence),
            "iou" => Ok(RewardKind::Iou),
            other => Err(Error::InvalidArgument(format!("unknown reward kind {other:?}"))),
        }
    }
}

/// Softmax probability of `target` under `logits`.
pub fn confidence(logits: &[f32], target: usize) -> Result<f64> {
    if target >= logits.len() {
        return Err(Error::LabelOutOfRange {
            label: target,
            classes: logits.len(),
        });
    }
    Ok(softmax(&logits.iter().map(|&v| v as f64).collect::<Vec<_>>())[target])
}

fn sign(d: f64) -> f32 {
    if d > 0.0 {
        1.0
    } else if d < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `sign(c_next − c_prev)`, with `sign(0) = 0`.
pub fn reward_step_confidence(c_prev: f64, c_next: f64) -> f32 {
    sign(c_next - c_prev)
}

/// `+η` when the final confidence reaches `τ` (inclusive), `−η` otherwise.
pub fn reward_terminal_confidence(c_final: f64, params: &RewardParams) -> f32 {
    if c_final >= params.tau {
        params.eta
    } else {
        -params.eta
    }
}

/// `sign(IoU(next) − IoU(prev))`; no improvement counts as `−1`.
pub fn reward_step_iou(prev: &BBox, next: &BBox, gt: &BBox) -> f32 {
    if iou(next, gt) > iou(prev, gt) {
        1.0
    } else {
        -1.0
    }
}

/// `+η` when the final IoU reaches `threshold` (inclusive), `−η` otherwise.
pub fn reward_terminal_iou(final_box: &BBox, gt: &BBox, threshold: f64, eta: f32) -> f32 {
    if iou(final_box, gt) >= threshold {
        eta
    } else {
        -eta
    }
}

/// What a reward needs to know about one transition.
#[derive(Clone, Copy, Debug)]
pub struct StepOutcome<'a> {
    pub prev_box: &'a BBox,
    pub next_box: &'a BBox,
    pub prev_confidence: f64,
    pub next_confidence: f64,
    pub gt_box: Option<&'a BBox>,
    pub terminal: bool,
}

impl RewardKind {
    pub fn reward(self, o: &StepOutcome<'_>, params: &RewardParams) -> Result<f32> {
        match self {
            RewardKind::Confidence if o.terminal => Ok(reward_terminal_confidence(o.next_confidence, params)),
            RewardKind::Confidence => Ok(reward_step_confidence(o.prev_confidence, o.next_confidence)),
            RewardKind::Iou => {
                let gt = o
                    .gt_box
                    .ok_or_else(|| Error::Config("IoU reward needs ground-truth boxes".into()))?;
                Ok(if o.terminal {
                    reward_terminal_iou(o.next_box, gt, IOU_THRESHOLD, params.eta)
                } else {
                    reward_step_iou(o.prev_box, o.next_box, gt)
                })
            }
        }
    }
}
