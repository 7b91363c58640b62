use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{argmax, confidence, AgentNet};
use crate::error::{Error, Result};
use crate::locenv::{build_observation, Action, BBox, EnvConfig, EnvState};
use crate::pipeline::Checkpoint;
use crate::synthgen::RgbImage;

/// One visited state: its box, the action taken from it (`None` for the
/// state an episode stopped at by the step cap), and the class prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub step: usize,
    #[serde(rename = "box")]
    pub bbox: BBox,
    pub action: Option<Action>,
    pub confidence: f64,
    pub predicted_class: usize,
}

/// Visited states in order, starting from the full image.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<TraceStep>,
}

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn boxes(&self) -> impl Iterator<Item = &BBox> {
        self.steps.iter().map(|s| &s.bbox)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub predicted_class: usize,
    pub final_box: BBox,
    pub trace: EpisodeTrace,
    pub triggered: bool,
    /// Box transformations taken; a Trigger is not counted.
    pub steps: usize,
    /// Class logits at the stopping state.
    pub logits: Vec<f32>,
}

fn check_image(image: &RgbImage) -> Result<()> {
    if image.width() == 0 || image.height() == 0 {
        return Err(Error::Image {
            path: "<memory>".into(),
            reason: format!("empty {}×{} image", image.width(), image.height()),
        });
    }
    Ok(())
}

/// Runs one rollout from the full image. `choose` picks the action given
/// the Q-values of the current state.
pub fn rollout(
    params: &AgentNet,
    env: &EnvConfig,
    image: &RgbImage,
    mut choose: impl FnMut(&[f32]) -> Action,
) -> Result<InferenceResult> {
    check_image(image)?;
    let mut state = EnvState::reset(image, env);
    let mut trace = EpisodeTrace::default();
    loop {
        let (q, logits) = params.evaluate(&build_observation(params, &state))?;
        let predicted_class = argmax(&logits);
        let mut entry = TraceStep {
            step: state.step_count,
            bbox: state.bbox,
            action: None,
            confidence: confidence(&logits, predicted_class)?,
            predicted_class,
        };
        if state.step_count >= env.max_steps {
            trace.steps.push(entry);
            return Ok(finish(state.bbox, trace, false, state.step_count, logits));
        }
        let action = choose(&q);
        entry.action = Some(action);
        trace.steps.push(entry);
        if action == Action::Trigger {
            return Ok(finish(state.bbox, trace, true, state.step_count, logits));
        }
        state = state.step(action, env)?.0;
    }
}

fn finish(final_box: BBox, trace: EpisodeTrace, triggered: bool, steps: usize, logits: Vec<f32>) -> InferenceResult {
    InferenceResult {
        predicted_class: argmax(&logits),
        final_box,
        trace,
        triggered,
        steps,
        logits,
    }
}

/// Greedy localization and classification of one image.
pub fn infer_with(params: &AgentNet, env: &EnvConfig, image: &RgbImage) -> Result<InferenceResult> {
    rollout(params, env, image, |q| Action::from_index(argmax(q)).expect("nine Q-values"))
}

pub fn infer(ckpt: &Checkpoint, image: &RgbImage) -> Result<InferenceResult> {
    infer_with(&ckpt.params, &ckpt.config.env, image)
}

/// Baseline policy: uniformly random box transformations until the step
/// cap (Trigger is never chosen).
pub fn infer_random<R: Rng + ?Sized>(
    params: &AgentNet,
    env: &EnvConfig,
    image: &RgbImage,
    rng: &mut R,
) -> Result<InferenceResult> {
    rollout(params, env, image, |_| Action::ALL[rng.gen_range(0..Action::COUNT - 1)])
}
