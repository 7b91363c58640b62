use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agent::{AgentDims, EpsilonSchedule, RewardParams, ETA, TAU, TRUNK_WIDTH};
use crate::error::{Error, Result};
use crate::locenv::EnvConfig;

/// Whole-image classification stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub lr: f32,
    pub lr_after_drop: f32,
    pub drop_epoch: usize,
    pub momentum: f32,
    pub weight_decay: f32,
    pub batch: usize,
    pub rotation_augment: bool,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 0.001,
            lr_after_drop: 0.0001,
            drop_epoch: 20,
            momentum: 0.9,
            weight_decay: 0.0001,
            batch: 64,
            rotation_augment: true,
        }
    }
}

impl PretrainConfig {
    pub fn lr_at(&self, epoch: usize) -> f32 {
        if epoch < self.drop_epoch {
            self.lr
        } else {
            self.lr_after_drop
        }
    }
}

/// How exploratory actions are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exploration {
    /// Uniform over all nine actions.
    Uniform,
    /// Greedy in the training reward: evaluates every action from the
    /// current state and prefers the ones that would be rewarded.
    Guided,
}

/// Joint localization + classification stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointConfig {
    pub epochs: usize,
    pub epsilon: EpsilonSchedule,
    /// Anneal ε per scene rather than per epoch.
    pub sub_epoch_annealing: bool,
    pub gamma: f32,
    pub replay_capacity: usize,
    pub batch: usize,
    /// Updates between target-network copies; 0 uses the online network.
    pub target_sync: usize,
    pub lr: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    /// Environment steps per Q-update.
    pub steps_per_update: usize,
    pub episodes_per_scene: usize,
    /// Scenes visited per epoch (a seeded shuffle prefix); `None` visits all.
    pub scenes_per_epoch: Option<usize>,
    pub exploration: Exploration,
    /// Keep training the encoder in this stage. Replay then stores crop
    /// pixels instead of encoder features.
    pub train_encoder: bool,
    /// Double-Q targets: the online network picks the next action, the
    /// target network scores it.
    pub double_q: bool,
}

impl Default for JointConfig {
    fn default() -> Self {
        Self {
            epochs: 15,
            epsilon: EpsilonSchedule::default(),
            sub_epoch_annealing: false,
            gamma: 0.9,
            replay_capacity: 10_000,
            batch: 64,
            target_sync: 500,
            lr: 0.001,
            momentum: 0.9,
            weight_decay: 0.0001,
            steps_per_update: 1,
            episodes_per_scene: 1,
            scenes_per_epoch: None,
            exploration: Exploration::Uniform,
            train_encoder: false,
            double_q: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardConfig {
    pub eta: f32,
    pub tau: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self { eta: ETA, tau: TAU }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub feature_dim: usize,
    pub trunk_width: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            feature_dim: 256,
            trunk_width: TRUNK_WIDTH,
        }
    }
}

/// Complete training configuration. Serialized as JSON with exactly this
/// key tree; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub pretrain: PretrainConfig,
    pub joint: JointConfig,
    pub env: EnvConfig,
    pub reward: RewardConfig,
    pub model: ModelConfig,
    pub seeds: Vec<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            pretrain: PretrainConfig::default(),
            joint: JointConfig::default(),
            env: EnvConfig::default(),
            reward: RewardConfig::default(),
            model: ModelConfig::default(),
            seeds: vec![0, 1, 2, 3],
        }
    }
}

impl TrainConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: TrainConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn reward_params(&self) -> RewardParams {
        RewardParams {
            eta: self.reward.eta,
            tau: self.reward.tau,
            gamma: self.joint.gamma,
        }
    }

    pub fn agent_dims(&self, num_classes: usize) -> AgentDims {
        AgentDims {
            input_side: self.env.encoder_input_side,
            feature_dim: self.model.feature_dim,
            history_dim: self.env.history_len * crate::locenv::Action::COUNT,
            trunk_width: self.model.trunk_width,
            num_classes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.pretrain;
        let j = &self.joint;
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(p.lr > 0.0 && p.lr_after_drop > 0.0 && j.lr >= 0.0) {
            return bad("learning rates must be positive");
        }
        if p.epochs > 0 && p.drop_epoch >= p.epochs {
            return bad("pretrain.drop_epoch must be below pretrain.epochs");
        }
        if !(0.0..1.0).contains(&p.momentum) || !(0.0..1.0).contains(&j.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if p.batch == 0 || j.batch == 0 || j.replay_capacity < j.batch || j.steps_per_update == 0 {
            return bad("batch sizes, replay capacity and steps_per_update must be positive (capacity ≥ batch)");
        }
        if j.episodes_per_scene == 0 {
            return bad("joint.episodes_per_scene must be positive");
        }
        if self.env.max_steps == 0 || !(self.env.alpha > 0.0 && self.env.alpha < 1.0) {
            return bad("env.max_steps must be positive and env.alpha in (0, 1)");
        }
        if !(self.env.min_box > 0.0 && self.env.min_box < 1.0) || self.env.encoder_input_side < 8 {
            return bad("env.min_box must be in (0, 1) and encoder_input_side ≥ 8");
        }
        if self.model.feature_dim == 0 || self.model.trunk_width == 0 {
            return bad("model widths must be positive");
        }
        self.reward_params().validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_keep_the_published_constants() {
        let c = TrainConfig::default();
        assert_eq!(c.pretrain.momentum, 0.9);
        assert_eq!((c.pretrain.lr, c.pretrain.lr_after_drop, c.pretrain.drop_epoch), (0.001, 0.0001, 20));
        assert_eq!(c.pretrain.weight_decay, 0.0001);
        assert_eq!(c.joint.epochs, 15);
        assert_eq!(c.env.max_steps, 40);
        assert_eq!((c.reward.eta, c.reward.tau), (2.0, 0.75));
        assert_eq!(c.seeds.len(), 4);
        c.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let c = TrainConfig::default();
        assert_eq!(TrainConfig::from_json(&c.to_json()).unwrap(), c);
        let mut v: serde_json::Value = serde_json::from_str(&c.to_json()).unwrap();
        v["joint"]["surprise"] = serde_json::json!(1);
        assert!(matches!(TrainConfig::from_json(&v.to_string()), Err(Error::Config(_))));
    }

    #[test]
    fn rejects_bad_schedule() {
        let mut c = TrainConfig::default();
        c.pretrain.drop_epoch = 30;
        assert!(c.validate().is_err());
        c.pretrain.epochs = 0;
        assert!(c.validate().is_ok());
    }

    #[test]
    fn lr_drops_at_epoch() {
        let p = PretrainConfig::default();
        assert_eq!(p.lr_at(19), 0.001);
        assert_eq!(p.lr_at(20), 0.0001);
    }
}
