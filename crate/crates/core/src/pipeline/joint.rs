use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{
    argmax, confidence, double_q_update, epsilon_greedy, AgentNet, joint_trainable, pixel_q_update, q_update, sync_target, ReplayBuffer,
    RewardKind, RewardParams, StepOutcome, Transition, UpdateLosses,
};
use crate::error::{Error, Result};
use crate::locenv::{build_observation, pixel_observation, Action, BBox, EnvConfig, EnvState, Observation};
use crate::numkit::{Module, SgdMomentum};
use crate::pipeline::{Checkpoint, Exploration, SceneSet, Stage, TrainConfig};
use crate::rng::{derive_seed, SplitMix64};

pub(crate) const STREAM_JOINT: u64 = 0x701d;

/// Metrics of one joint-training epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct JointEpoch {
    pub epoch: usize,
    pub epsilon: f64,
    pub episodes: usize,
    pub env_steps: usize,
    pub updates: u64,
    pub mean_return: f64,
    pub mean_episode_steps: f64,
    pub trigger_rate: f64,
    pub mean_q_loss: f64,
    pub mean_class_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub reward_kind: RewardKind,
    pub epochs: Vec<JointEpoch>,
}

/// Rejects rewards outside the closed set the reward function can emit.
fn check_reward(kind: RewardKind, r: f32, params: &RewardParams) -> Result<()> {
    let ok = [-1.0, 0.0, 1.0, -params.eta, params.eta].contains(&r);
    if ok && (kind == RewardKind::Confidence || r != 0.0) {
        Ok(())
    } else {
        Err(Error::Contract(format!("{} reward {r} outside its value set", kind.name())))
    }
}

/// What the reward of a transition depends on besides the two states.
struct RewardContext<'a> {
    kind: RewardKind,
    params: &'a RewardParams,
    label: usize,
    gt_box: Option<&'a BBox>,
}

/// One candidate transition from the current state, fully evaluated.
struct Outcome<'a> {
    action: Action,
    next: EnvState<'a>,
    terminal: bool,
    next_obs: Observation,
    next_q: Vec<f32>,
    c_next: f64,
    reward: f32,
}

fn simulate<'a>(
    params: &AgentNet,
    env: &EnvConfig,
    ctx: &RewardContext<'_>,
    state: &EnvState<'a>,
    c: f64,
    action: Action,
) -> Result<Outcome<'a>> {
    let (next, terminal) = state.step(action, env)?;
    let next_obs = build_observation(params, &next);
    let (next_q, next_logits) = params.evaluate(&next_obs)?;
    let c_next = confidence(&next_logits, ctx.label)?;
    let reward = ctx.kind.reward(
        &StepOutcome {
            prev_box: &state.bbox,
            next_box: &next.bbox,
            prev_confidence: c,
            next_confidence: c_next,
            gt_box: ctx.gt_box,
            terminal,
        },
        ctx.params,
    )?;
    Ok(Outcome { action, next, terminal, next_obs, next_q, c_next, reward })
}

/// Exploration that is greedy in the training reward: the trigger when it
/// would pay off, otherwise a uniform pick among the actions with positive
/// reward, otherwise a uniform pick among all nine.
fn guided_choice<'a>(mut all: Vec<Outcome<'a>>, rng: &mut SplitMix64) -> Outcome<'a> {
    let trigger = Action::Trigger.index();
    if all[trigger].reward > 0.0 {
        return all.swap_remove(trigger);
    }
    let positive: Vec<usize> = (0..all.len()).filter(|&i| all[i].reward > 0.0).collect();
    let pick = if positive.is_empty() {
        rng.gen_range(0..all.len())
    } else {
        positive[rng.gen_range(0..positive.len())]
    };
    all.swap_remove(pick)
}

/// Joint DQN + classification training starting from a pre-trained checkpoint.
pub fn train_joint(
    config: &TrainConfig,
    pretrained: &Checkpoint,
    train: &SceneSet,
    seed: u64,
    kind: RewardKind,
) -> Result<(Checkpoint, JointReport)> {
    config.validate()?;
    if pretrained.num_classes() != train.num_classes() || pretrained.class_names != train.manifest.class_names {
        return Err(Error::Config(format!(
            "checkpoint has {} classes, dataset has {}",
            pretrained.num_classes(),
            train.num_classes()
        )));
    }
    if kind == RewardKind::Iou && !train.manifest.has_gt_boxes() {
        return Err(Error::Config("the IoU reward needs ground-truth boxes in the manifest".into()));
    }
    if train.is_empty() {
        return Err(Error::Config("joint training needs a non-empty training set".into()));
    }
    let j = &config.joint;
    let env = &config.env;
    let reward = config.reward_params();
    let mut params = pretrained.params.clone();
    let trainable = |name: &str| j.train_encoder || joint_trainable(name);
    let mut optimizer = SgdMomentum::new(&params, j.lr, j.momentum, j.weight_decay, trainable);
    let stored = |obs: &Observation, state: &EnvState<'_>| {
        if j.train_encoder {
            pixel_observation(state, env.encoder_input_side)
        } else {
            obs.clone()
        }
    };
    let mut target = (j.target_sync > 0).then(|| sync_target(&params));
    let mut replay = ReplayBuffer::new(j.replay_capacity);
    let mut rng = SplitMix64::new(derive_seed(seed, STREAM_JOINT, 0));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let per_epoch = j.scenes_per_epoch.unwrap_or(train.len()).min(train.len());
    let mut updates = 0u64;
    let mut env_steps_total = 0u64;
    let mut epochs = Vec::with_capacity(j.epochs);

    for epoch in 0..j.epochs {
        order.shuffle(&mut rng);
        let mut stats = JointEpoch {
            epoch,
            epsilon: j.epsilon.value(epoch as f64),
            ..Default::default()
        };
        let mut returns = 0.0;
        let mut triggers = 0;
        let mut losses = UpdateLosses::default();
        let epoch_updates_start = updates;
        for (n, &idx) in order[..per_epoch].iter().enumerate() {
            let eps = if j.sub_epoch_annealing {
                j.epsilon.value(epoch as f64 + n as f64 / per_epoch as f64)
            } else {
                stats.epsilon
            };
            let record = &train.manifest.records[idx];
            let label = record.class_id;
            let ctx = RewardContext { kind, params: &reward, label, gt_box: record.gt_box.as_ref() };
            for _ in 0..j.episodes_per_scene {
                let mut state = EnvState::reset(&train.images[idx], env);
                let mut obs = build_observation(&params, &state);
                let (mut q, logits) = params.evaluate(&obs)?;
                let mut c = confidence(&logits, label)?;
                loop {
                    let explore = |rng: &mut SplitMix64| eps > 0.0 && rng.gen::<f64>() < eps;
                    let step = |action| simulate(&params, env, &ctx, &state, c, action);
                    let Outcome { action, next, terminal, next_obs, next_q, c_next, reward: r } = match j.exploration {
                        Exploration::Uniform => step(epsilon_greedy(&q, eps, &mut rng))?,
                        Exploration::Guided if explore(&mut rng) => {
                            let all = Action::ALL.iter().map(|&a| step(a)).collect::<Result<Vec<_>>>()?;
                            guided_choice(all, &mut rng)
                        }
                        Exploration::Guided => step(Action::from_index(argmax(&q)).expect("nine Q-values"))?,
                    };
                    check_reward(kind, r, &reward)?;
                    returns += r as f64;
                    replay.push(Transition {
                        obs: stored(&obs, &state),
                        action,
                        reward: r,
                        next_obs: stored(&next_obs, &next),
                        terminal,
                        label,
                    });
                    stats.env_steps += 1;
                    env_steps_total += 1;
                    if replay.len() >= j.batch && env_steps_total % j.steps_per_update as u64 == 0 {
                        let batch = replay.sample(j.batch, &mut rng);
                        let t = target.as_ref();
                        let l = match (j.train_encoder, j.double_q) {
                            (true, double) => pixel_q_update(&mut params, t, &batch, &reward, &mut optimizer, double)?,
                            (false, false) => q_update(&mut params, t, &batch, &reward, &mut optimizer)?,
                            (false, true) => double_q_update(&mut params, t, &batch, &reward, &mut optimizer)?,
                        };
                        losses.q_loss += l.q_loss;
                        losses.class_loss += l.class_loss;
                        updates += 1;
                        if j.target_sync > 0 && updates % j.target_sync as u64 == 0 {
                            target = Some(sync_target(&params));
                        }
                    }
                    if terminal {
                        triggers += usize::from(next.step_count < env.max_steps);
                        stats.mean_episode_steps += next.step_count as f64;
                        break;
                    }
                    state = next;
                    obs = next_obs;
                    q = next_q;
                    c = c_next;
                }
                stats.episodes += 1;
            }
        }
        let episodes = stats.episodes.max(1) as f64;
        let epoch_updates = (updates - epoch_updates_start).max(1) as f64;
        stats.updates = updates - epoch_updates_start;
        stats.mean_return = returns / episodes;
        stats.mean_episode_steps /= episodes;
        stats.trigger_rate = triggers as f64 / episodes;
        stats.mean_q_loss = losses.q_loss / epoch_updates;
        stats.mean_class_loss = losses.class_loss / epoch_updates;
        epochs.push(stats);
    }

    params.zero_grad();
    let mut progress = pretrained.progress.clone();
    progress.stage = Stage::Joint;
    progress.joint_epochs = j.epochs;
    progress.updates = updates;
    progress.reward_kind = Some(kind);
    progress.seed = seed;
    let ckpt = Checkpoint {
        params,
        optimizer,
        progress,
        config: config.clone(),
        class_names: pretrained.class_names.clone(),
        rng_state: rng.state(),
    };
    Ok((ckpt, JointReport { reward_kind: kind, epochs }))
}
