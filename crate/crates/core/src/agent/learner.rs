use crate::agent::{argmax, AgentNet, ReplayBuffer, RewardParams, Transition, TrunkPass};
use crate::error::{Error, Result};
use crate::locenv::Observation;
use crate::numkit::{cross_entropy_loss, mse_loss, Module, Real, SgdMomentum, Tensor};

/// Losses of one joint update; the optimized objective is their plain sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateLosses {
    pub q_loss: f64,
    pub class_loss: f64,
}

impl UpdateLosses {
    pub fn total(&self) -> f64 {
        self.q_loss + self.class_loss
    }
}

pub fn stack_observations<'a, T: Real>(rows: impl ExactSizeIterator<Item = &'a Observation>) -> Result<Tensor<T>> {
    let n = rows.len();
    let mut data = Vec::new();
    let mut width = None;
    for o in rows {
        if *width.get_or_insert(o.len()) != o.len() {
            return Err(Error::shape("stack_observations", width.unwrap_or(0), o.len()));
        }
        data.extend(o.data.iter().map(|&v| T::from_f64(v as f64)));
    }
    Tensor::from_vec(&[n, width.unwrap_or(0)], data)
}

/// One-step TD targets `r` (terminal) or `r + γ·max_a' Q_target(s', a')`.
pub fn td_targets(target: &AgentNet, batch: &[&Transition], gamma: f32) -> Result<Vec<f32>> {
    let next = stack_observations::<f32>(batch.iter().map(|t| &t.next_obs))?;
    bootstrap(&target.forward(&next)?, None, batch, gamma)
}

/// Double-Q targets `r + γ·Q_target(s', argmax_a' Q_online(s', a'))`: the
/// online network picks the action and the target network scores it, which
/// removes most of the max-operator's overestimation.
pub fn double_td_targets(online: &AgentNet, target: &AgentNet, batch: &[&Transition], gamma: f32) -> Result<Vec<f32>> {
    let next = stack_observations::<f32>(batch.iter().map(|t| &t.next_obs))?;
    bootstrap(&target.forward(&next)?, Some(&online.forward(&next)?), batch, gamma)
}

fn bootstrap(
    next: &TrunkPass<f32>,
    chooser: Option<&TrunkPass<f32>>,
    batch: &[&Transition],
    gamma: f32,
) -> Result<Vec<f32>> {
    if next.q.rows() != batch.len() {
        return Err(Error::shape("td_targets", batch.len(), next.q.rows()));
    }
    Ok(batch
        .iter()
        .enumerate()
        .map(|(i, t)| {
            if t.terminal {
                return t.reward;
            }
            let q = next.q.row(i);
            let value = match chooser {
                Some(online) => q[argmax(online.q.row(i))],
                None => q.iter().copied().fold(f32::NEG_INFINITY, f32::max),
            };
            t.reward + gamma * value
        })
        .collect())
}

/// Splits stacked `[pixels, history]` rows into a pixel and a history tensor.
fn split_pixel_rows(stacked: &Tensor, pixel_dim: usize) -> Result<(Tensor, Tensor)> {
    let (b, w) = (stacked.rows(), stacked.cols());
    if w <= pixel_dim {
        return Err(Error::shape("split_pixel_rows", format!("> {pixel_dim} columns"), w));
    }
    let mut pixels = Vec::with_capacity(b * pixel_dim);
    let mut history = Vec::with_capacity(b * (w - pixel_dim));
    for i in 0..b {
        let (p, h) = stacked.row(i).split_at(pixel_dim);
        pixels.extend_from_slice(p);
        history.extend_from_slice(h);
    }
    Ok((Tensor::from_vec(&[b, pixel_dim], pixels)?, Tensor::from_vec(&[b, w - pixel_dim], history)?))
}

/// Trunk pass over stacked `[pixels, history]` rows.
fn pixel_forward(net: &AgentNet, stacked: &Tensor) -> Result<TrunkPass<f32>> {
    let (pixels, history) = split_pixel_rows(stacked, net.dims.pixel_dim())?;
    let (_, feat) = net.encode_batch(&pixels)?;
    let f = feat.cols();
    let mut obs = Tensor::zeros(&[feat.rows(), net.dims.obs_dim()]);
    for i in 0..feat.rows() {
        obs.row_mut(i)[..f].copy_from_slice(feat.row(i));
        obs.row_mut(i)[f..].copy_from_slice(history.row(i));
    }
    net.forward(&obs)
}

/// TD targets for transitions whose observations hold raw crop pixels;
/// with `online` given they are double-Q targets.
pub fn pixel_td_targets(online: Option<&AgentNet>, target: &AgentNet, batch: &[&Transition], gamma: f32) -> Result<Vec<f32>> {
    let next = stack_observations::<f32>(batch.iter().map(|t| &t.next_obs))?;
    let chooser = online.map(|n| pixel_forward(n, &next)).transpose()?;
    bootstrap(&pixel_forward(target, &next)?, chooser.as_ref(), batch, gamma)
}

/// Head losses of a trunk pass and their gradients w.r.t. Q-values and logits.
fn head_losses<T: Real>(
    pass: &TrunkPass<T>,
    actions: &[usize],
    targets: &[f64],
    labels: &[usize],
) -> Result<(UpdateLosses, Tensor<T>, Tensor<T>)> {
    let b = pass.q.rows();
    if actions.len() != b || targets.len() != b || labels.len() != b {
        return Err(Error::shape("joint_loss", b, format!("{}/{}/{}", actions.len(), targets.len(), labels.len())));
    }
    let mut grad_q = Tensor::zeros(pass.q.dims());
    let mut q_loss = 0.0;
    for i in 0..b {
        let (l, g) = mse_loss(pass.q.row(i)[actions[i]].to_f64(), targets[i]);
        q_loss += l;
        grad_q.row_mut(i)[actions[i]] = T::from_f64(g / b as f64);
    }
    let (class_loss, grad_logits) = cross_entropy_loss(&pass.logits, labels)?;
    let losses = UpdateLosses {
        q_loss: q_loss / b as f64,
        class_loss,
    };
    Ok((losses, grad_q, grad_logits))
}

/// Mean squared TD error on the taken actions plus mean cross-entropy of the
/// class head. With `backward`, gradients of the sum are accumulated into `net`.
/// Returns the losses and the ReLU sign fingerprint of the pass.
pub fn joint_loss<T: Real>(
    net: &mut AgentNet<T>,
    obs: &Tensor<T>,
    actions: &[usize],
    targets: &[f64],
    labels: &[usize],
    backward: bool,
) -> Result<(UpdateLosses, u64)> {
    let pass = net.forward(obs)?;
    let (losses, grad_q, grad_logits) = head_losses(&pass, actions, targets, labels)?;
    if backward {
        net.backward(obs, &pass, Some(&grad_q), Some(&grad_logits))?;
    }
    Ok((losses, pass.pattern(0)))
}

/// [`joint_loss`] evaluated from raw crop pixels and action histories, so
/// that gradients also reach the encoder.
pub fn pixel_joint_loss<T: Real>(
    net: &mut AgentNet<T>,
    pixels: &Tensor<T>,
    history: &Tensor<T>,
    actions: &[usize],
    targets: &[f64],
    labels: &[usize],
    backward: bool,
) -> Result<(UpdateLosses, u64)> {
    let (pre, feat) = net.encode_batch(pixels)?;
    let (b, f) = (feat.rows(), feat.cols());
    if history.rows() != b || f + history.cols() != net.dims.obs_dim() {
        return Err(Error::shape(
            "pixel_joint_loss",
            format!("[{b}×{}]", net.dims.history_dim),
            format!("{:?}", history.dims()),
        ));
    }
    let mut obs = Tensor::zeros(&[b, net.dims.obs_dim()]);
    for i in 0..b {
        obs.row_mut(i)[..f].copy_from_slice(feat.row(i));
        obs.row_mut(i)[f..].copy_from_slice(history.row(i));
    }
    let pass = net.forward(&obs)?;
    let (losses, grad_q, grad_logits) = head_losses(&pass, actions, targets, labels)?;
    if backward {
        let grad_obs = net.backward(&obs, &pass, Some(&grad_q), Some(&grad_logits))?;
        let mut grad_feat = Tensor::zeros(feat.dims());
        for i in 0..b {
            grad_feat.row_mut(i).copy_from_slice(&grad_obs.row(i)[..f]);
        }
        net.backward_encoder(pixels, &pre, &grad_feat)?;
    }
    Ok((losses, crate::numkit::fold_pattern(pass.pattern(0), &pre)))
}

/// One Q-learning step with the joint classification loss. When `target` is
/// `None` the online parameters (before this update) provide the TD targets.
pub fn q_update(
    params: &mut AgentNet,
    target: Option<&AgentNet>,
    batch: &[&Transition],
    reward: &RewardParams,
    optimizer: &mut SgdMomentum,
) -> Result<UpdateLosses> {
    fit_targets(params, target, batch, reward, optimizer, false)
}

/// [`q_update`] with double-Q targets.
pub fn double_q_update(
    params: &mut AgentNet,
    target: Option<&AgentNet>,
    batch: &[&Transition],
    reward: &RewardParams,
    optimizer: &mut SgdMomentum,
) -> Result<UpdateLosses> {
    fit_targets(params, target, batch, reward, optimizer, true)
}

fn fit_targets(
    params: &mut AgentNet,
    target: Option<&AgentNet>,
    batch: &[&Transition],
    reward: &RewardParams,
    optimizer: &mut SgdMomentum,
    double: bool,
) -> Result<UpdateLosses> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("q_update needs a non-empty batch".into()));
    }
    let target = target.unwrap_or(params);
    let y = if double {
        double_td_targets(params, target, batch, reward.gamma)?
    } else {
        td_targets(target, batch, reward.gamma)?
    };
    let obs = stack_observations::<f32>(batch.iter().map(|t| &t.obs))?;
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let labels: Vec<usize> = batch.iter().map(|t| t.label).collect();
    let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    params.zero_grad();
    let (losses, _) = joint_loss(params, &obs, &actions, &targets, &labels, true)?;
    optimizer.step(params)?;
    Ok(losses)
}

/// [`q_update`] for pixel observations: the encoder is trained as well.
pub fn pixel_q_update(
    params: &mut AgentNet,
    target: Option<&AgentNet>,
    batch: &[&Transition],
    reward: &RewardParams,
    optimizer: &mut SgdMomentum,
    double: bool,
) -> Result<UpdateLosses> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("q_update needs a non-empty batch".into()));
    }
    let online = double.then_some(&*params);
    let y = pixel_td_targets(online, target.unwrap_or(params), batch, reward.gamma)?;
    let obs = stack_observations::<f32>(batch.iter().map(|t| &t.obs))?;
    let (pixels, history) = split_pixel_rows(&obs, params.dims.pixel_dim())?;
    let actions: Vec<usize> = batch.iter().map(|t| t.action.index()).collect();
    let labels: Vec<usize> = batch.iter().map(|t| t.label).collect();
    let targets: Vec<f64> = y.iter().map(|&v| v as f64).collect();
    params.zero_grad();
    let (losses, _) = pixel_joint_loss(params, &pixels, &history, &actions, &targets, &labels, true)?;
    optimizer.step(params)?;
    Ok(losses)
}

/// Samples a batch from `replay` and runs [`q_update`].
pub fn replay_update<R: rand::Rng + ?Sized>(
    params: &mut AgentNet,
    target: Option<&AgentNet>,
    replay: &ReplayBuffer,
    batch_size: usize,
    reward: &RewardParams,
    optimizer: &mut SgdMomentum,
    rng: &mut R,
) -> Result<UpdateLosses> {
    let batch = replay.sample(batch_size, rng);
    q_update(params, target, &batch, reward, optimizer)
}

/// Deep copy used as the TD target network.
pub fn sync_target(params: &AgentNet) -> AgentNet {
    params.clone()
}

/// Parameters trained by the joint stage: everything except the encoder,
/// which is frozen once pre-training ends (observations in the replay buffer
/// already hold its features).
pub fn joint_trainable(name: &str) -> bool {
    !name.starts_with("encoder.")
}

/// Parameters trained by whole-image pre-training: everything except the Q head.
pub fn pretrain_trainable(name: &str) -> bool {
    !name.starts_with("q_head.")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::AgentDims;
    use crate::locenv::{Action, Encoder};
    use crate::rng::SplitMix64;
    use rand::Rng;

    fn dims() -> AgentDims {
        AgentDims {
            input_side: 8,
            feature_dim: 6,
            history_dim: 18,
            trunk_width: 12,
            num_classes: 3,
        }
    }

    fn transition(rng: &mut SplitMix64, terminal: bool, reward: f32) -> Transition {
        let mut o = || Observation {
            data: (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            feature_dim: 6,
        };
        let (obs, next_obs) = (o(), o());
        Transition {
            obs,
            action: Action::ScaleDown,
            reward,
            next_obs,
            terminal,
            label: 1,
        }
    }

    #[test]
    fn terminal_target_is_the_reward() {
        let mut rng = SplitMix64::new(1);
        let net = AgentNet::<f32>::init(dims(), &mut rng);
        let t = transition(&mut rng, true, 2.0);
        assert_eq!(td_targets(&net, &[&t], 0.9).unwrap(), vec![2.0]);
        let t = transition(&mut rng, false, -1.0);
        assert_eq!(td_targets(&net, &[&t], 0.0).unwrap(), vec![-1.0]);
    }

    #[test]
    fn matching_terminal_q_has_zero_td_loss() {
        let mut rng = SplitMix64::new(2);
        let mut net = AgentNet::<f32>::zeros(dims());
        net.q_head.bias.data_mut()[Action::ScaleDown.index()] = 2.0;
        let t = transition(&mut rng, true, 2.0);
        let obs = stack_observations::<f32>([&t.obs].into_iter()).unwrap();
        let (l, _) = joint_loss(&mut net, &obs, &[Action::ScaleDown.index()], &[2.0], &[1], false).unwrap();
        assert_eq!(l.q_loss, 0.0);
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut rng = SplitMix64::new(3);
        let mut net = AgentNet::<f32>::init(dims(), &mut rng);
        let before = net.clone();
        let ts: Vec<Transition> = (0..4).map(|i| transition(&mut rng, i % 2 == 0, 1.0)).collect();
        let batch: Vec<&Transition> = ts.iter().collect();
        let mut opt = SgdMomentum::new(&net, 0.0, 0.9, 1e-4, joint_trainable);
        let target = sync_target(&net);
        q_update(&mut net, Some(&target), &batch, &RewardParams::default(), &mut opt).unwrap();
        let mut same = true;
        net.visit(&mut |name, p, _| {
            before.visit(&mut |n2, p2, _| {
                if name == n2 {
                    same &= p.data().iter().zip(p2.data()).all(|(a, b)| a.to_bits() == b.to_bits());
                }
            })
        });
        assert!(same);
    }

    #[test]
    fn target_copy_is_independent() {
        let mut rng = SplitMix64::new(4);
        let mut net = AgentNet::<f32>::init(dims(), &mut rng);
        let target = sync_target(&net);
        let t = transition(&mut rng, false, 0.0);
        assert_eq!(net.evaluate(&t.obs).unwrap(), target.evaluate(&t.obs).unwrap());
        net.q_head.bias.data_mut()[0] += 1.0;
        assert_ne!(net.evaluate(&t.obs).unwrap(), target.evaluate(&t.obs).unwrap());
        assert_eq!(sync_target(&target), target);
    }

    #[test]
    fn update_reduces_loss_on_a_fixed_batch() {
        let mut rng = SplitMix64::new(5);
        let mut net = AgentNet::<f32>::init(dims(), &mut rng);
        let ts: Vec<Transition> = (0..8).map(|i| transition(&mut rng, true, if i % 2 == 0 { 2.0 } else { -2.0 })).collect();
        let batch: Vec<&Transition> = ts.iter().collect();
        let mut opt = SgdMomentum::new(&net, 0.01, 0.9, 0.0, joint_trainable);
        let first = q_update(&mut net, None, &batch, &RewardParams::default(), &mut opt).unwrap();
        let mut last = first;
        for _ in 0..50 {
            last = q_update(&mut net, None, &batch, &RewardParams::default(), &mut opt).unwrap();
        }
        assert!(last.total() < first.total());
    }

    #[test]
    fn pixel_targets_match_encoded_targets() {
        let mut rng = SplitMix64::new(6);
        let net = AgentNet::<f32>::init(dims(), &mut rng);
        let pixel_dim = dims().pixel_dim();
        let mut pixel = |rng: &mut SplitMix64| Observation {
            data: (0..pixel_dim + 18).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            feature_dim: pixel_dim,
        };
        let encode = |o: &Observation| {
            let mut data = net.encode(&o.data[..pixel_dim]);
            data.extend_from_slice(&o.data[pixel_dim..]);
            Observation { data, feature_dim: 6 }
        };
        let raw: Vec<Transition> = (0..5)
            .map(|i| Transition {
                obs: pixel(&mut rng),
                action: Action::MoveUp,
                reward: -1.0,
                next_obs: pixel(&mut rng),
                terminal: i == 2,
                label: 0,
            })
            .collect();
        let encoded: Vec<Transition> = raw
            .iter()
            .map(|t| Transition { obs: encode(&t.obs), next_obs: encode(&t.next_obs), ..t.clone() })
            .collect();
        let a = pixel_td_targets(None, &net, &raw.iter().collect::<Vec<_>>(), 0.9).unwrap();
        let b = td_targets(&net, &encoded.iter().collect::<Vec<_>>(), 0.9).unwrap();
        assert_eq!(a[2], -1.0);
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-5), "{a:?} vs {b:?}");
    }

    #[test]
    fn double_targets_score_the_online_choice_with_the_target_net() {
        let mut rng = SplitMix64::new(7);
        let t = transition(&mut rng, false, 1.0);
        let mut online = AgentNet::<f32>::zeros(dims());
        let mut target = AgentNet::<f32>::zeros(dims());
        online.q_head.bias.data_mut()[Action::Taller.index()] = 5.0;
        target.q_head.bias.data_mut().copy_from_slice(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 3.0]);
        let double = double_td_targets(&online, &target, &[&t], 0.5).unwrap();
        let plain = td_targets(&target, &[&t], 0.5).unwrap();
        assert_eq!(double, vec![1.0 + 0.5 * -1.0]);
        assert_eq!(plain, vec![1.0 + 0.5 * 3.0]);
    }
}
