#![allow(dead_code)]

use std::path::Path;

use rllogo::pipeline::{SceneSet, TrainConfig};
use rllogo::synthgen::{generate_dataset, GenConfig};

/// Small network and short schedules so whole pipelines run in seconds.
pub fn tiny_config() -> TrainConfig {
    let mut c = TrainConfig::default();
    c.model.feature_dim = 16;
    c.model.trunk_width = 32;
    c.env.encoder_input_side = 8;
    c.pretrain.epochs = 2;
    c.pretrain.drop_epoch = 1;
    c.pretrain.batch = 16;
    c.joint.epochs = 2;
    c.joint.batch = 8;
    c.joint.replay_capacity = 64;
    c.joint.target_sync = 10;
    c.joint.scenes_per_epoch = Some(6);
    c.seeds = vec![3];
    c
}

pub fn tiny_dataset(dir: &Path, seed: u64) -> (SceneSet, SceneSet) {
    let cfg = GenConfig::new(4, 24, 12, (0.3, 0.9), seed);
    generate_dataset(&cfg, dir).unwrap();
    (
        SceneSet::load(&dir.join("train.jsonl")).unwrap(),
        SceneSet::load(&dir.join("eval.jsonl")).unwrap(),
    )
}

use rand::Rng;
use rllogo::agent::{pixel_joint_loss, AgentDims, AgentNet};
use rllogo::numkit::{grad_check, GradCheckReport, Probe, Tensor};
use rllogo::rng::SplitMix64;

/// Agent network small enough for exhaustive finite differences
/// (encoder from 4×4 crops, trunk width 32).
pub fn gradcheck_dims() -> AgentDims {
    AgentDims {
        input_side: 4,
        feature_dim: 8,
        history_dim: 90,
        trunk_width: 32,
        num_classes: 4,
    }
}

/// Finite-difference check of the full joint loss (encoder, trunk and both
/// heads) on a seeded random batch.
pub fn agent_grad_check(seed: u64) -> GradCheckReport {
    let dims = gradcheck_dims();
    let mut rng = SplitMix64::new(seed);
    let mut net = AgentNet::<f32>::init(dims.clone(), &mut rng);
    // random biases so that no unit sits exactly at a kink
    use rllogo::numkit::Module;
    net.visit_mut(&mut |name, p, _| {
        if name.ends_with("bias") {
            p.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.1..0.1));
        }
    });
    let b = 3;
    let pixels = Tensor::from_vec(&[b, dims.pixel_dim()], (0..b * dims.pixel_dim()).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    let mut history = Tensor::zeros(&[b, dims.history_dim]);
    for i in 0..b {
        for slot in 0..rng.gen_range(0..10) {
            history.row_mut(i)[slot * 9 + rng.gen_range(0..9)] = 1.0;
        }
    }
    let actions: Vec<usize> = (0..b).map(|_| rng.gen_range(0..9)).collect();
    let targets: Vec<f64> = (0..b).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let labels: Vec<usize> = (0..b).map(|_| rng.gen_range(0..dims.num_classes)).collect();
    let shadow = net.cast::<f64>();
    let (p64, h64) = (pixels.cast::<f64>(), history.cast::<f64>());
    grad_check(
        &mut net,
        &shadow,
        |n| Ok(pixel_joint_loss(n, &pixels, &history, &actions, &targets, &labels, true)?.0.total()),
        |n| {
            let mut n = n.clone();
            let (l, pattern) = pixel_joint_loss(&mut n, &p64, &h64, &actions, &targets, &labels, false)?;
            Ok(Probe { loss: l.total(), pattern })
        },
        1e-3,
    )
    .unwrap()
}
