//! Two-stage training (whole-image pre-training, then joint DQN training),
//! greedy inference, checkpoints and multi-seed runs.

mod checkpoint;
mod config;
mod data;
mod fourshot;
mod infer;
mod joint;
mod pretrain;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Progress, Stage};
pub use config::{Exploration, JointConfig, ModelConfig, PretrainConfig, RewardConfig, TrainConfig};
pub use data::SceneSet;
pub use fourshot::{run_4shot, FourShotReport, SeedRun};
pub use infer::{infer, infer_random, infer_with, rollout, EpisodeTrace, InferenceResult, TraceStep};
pub use joint::{train_joint, JointEpoch, JointReport};
pub use pretrain::{
    init_checkpoint, pretrain, whole_image_logits, whole_image_pixels, whole_image_top1, PretrainEpoch,
    PretrainReport,
};
