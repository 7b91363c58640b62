use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::locenv::{Action, Observation};
use crate::agent::AgentNet;

/// Linear ε annealing by (possibly fractional) epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    pub anneal_epochs: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        Self {
            start: 1.0,
            end: 0.1,
            anneal_epochs: 5.0,
        }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, epoch: f64) -> f64 {
        if self.anneal_epochs <= 0.0 || epoch >= self.anneal_epochs {
            return self.end;
        }
        let t = epoch.max(0.0) / self.anneal_epochs;
        self.start + (self.end - self.start) * t
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// ε-greedy over Q-values: uniform over all nine actions with probability
/// ε, otherwise the greedy action. No randomness is drawn when ε is zero.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f32], epsilon: f64, rng: &mut R) -> Action {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return Action::ALL[rng.gen_range(0..Action::COUNT)];
    }
    Action::from_index(argmax(q_values)).expect("nine Q-values")
}

pub fn select_action<R: Rng + ?Sized>(
    params: &AgentNet,
    obs: &Observation,
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    let (q, _) = params.evaluate(obs)?;
    Ok(epsilon_greedy(&q, epsilon, rng))
}
