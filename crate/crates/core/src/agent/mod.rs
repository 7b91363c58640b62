//! The joint DQN agent: network, rewards, exploration, replay and updates.

mod archive;
mod learner;
mod network;
mod policy;
mod replay;
mod reward;

pub use archive::{bytes_to_tensor, tensor_to_bytes, TensorArchive, FORMAT_VERSION, MAGIC};
pub use learner::{
    double_q_update, double_td_targets, joint_loss, joint_trainable, pixel_joint_loss, pixel_q_update, pixel_td_targets, pretrain_trainable, q_update,
    replay_update, stack_observations, sync_target, td_targets, UpdateLosses,
};
pub use network::{AgentDims, AgentNet, AgentParams, TrunkPass, TRUNK_WIDTH};
pub use policy::{argmax, epsilon_greedy, select_action, EpsilonSchedule};
pub use replay::{ReplayBuffer, Transition};
pub use reward::{
    confidence, reward_step_confidence, reward_step_iou, reward_terminal_confidence,
    reward_terminal_iou, RewardKind, RewardParams, StepOutcome, ETA, IOU_THRESHOLD, TAU,
};
