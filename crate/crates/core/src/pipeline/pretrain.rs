use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{argmax, pretrain_trainable, AgentNet};
use crate::error::{Error, Result};
use crate::locenv::{normalized_crop, BBox};
use crate::numkit::{cross_entropy_loss, Module, SgdMomentum, Tensor};
use crate::pipeline::{Checkpoint, Progress, SceneSet, Stage, TrainConfig};
use crate::rng::{derive_seed, SplitMix64};
use crate::synthgen::{rotate_90k, RgbImage};

pub(crate) const STREAM_INIT: u64 = 0x1417;
pub(crate) const STREAM_PRETRAIN: u64 = 0x9e7a;

/// Metrics of one pre-training epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainEpoch {
    pub epoch: usize,
    pub lr: f32,
    /// Training-set loss of the parameters the epoch started from (no augmentation).
    pub start_loss: f64,
    pub mean_batch_loss: f64,
    pub eval_top1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    pub epochs: Vec<PretrainEpoch>,
    pub final_train_loss: f64,
    pub final_eval_top1: f64,
}

impl PretrainReport {
    /// Epochs whose start loss exceeds the previous epoch's start loss
    /// (counting the final loss as one more point).
    pub fn loss_increases(&self) -> usize {
        let mut losses: Vec<f64> = self.epochs.iter().map(|e| e.start_loss).collect();
        losses.push(self.final_train_loss);
        losses.windows(2).filter(|w| w[1] > w[0]).count()
    }
}

/// Fresh checkpoint holding seeded initial parameters.
pub fn init_checkpoint(config: &TrainConfig, class_names: Vec<String>, seed: u64) -> Result<Checkpoint> {
    config.validate()?;
    let dims = config.agent_dims(class_names.len());
    let mut rng = SplitMix64::new(derive_seed(seed, STREAM_INIT, 0));
    let params = AgentNet::init(dims, &mut rng);
    let p = &config.pretrain;
    let optimizer = SgdMomentum::new(&params, p.lr, p.momentum, p.weight_decay, pretrain_trainable);
    Ok(Checkpoint {
        params,
        optimizer,
        progress: Progress {
            stage: Stage::Init,
            pretrain_epochs: 0,
            joint_epochs: 0,
            updates: 0,
            reward_kind: None,
            seed,
        },
        config: config.clone(),
        class_names,
        rng_state: SplitMix64::new(derive_seed(seed, STREAM_PRETRAIN, 0)).state(),
    })
}

/// Whole-image input: the full-box crop of the (optionally rotated) image.
pub fn whole_image_pixels(image: &RgbImage, side: usize, quarter_turns: u8) -> Result<Vec<f32>> {
    if quarter_turns % 4 == 0 {
        return Ok(normalized_crop(image, &BBox::FULL, side));
    }
    Ok(normalized_crop(&rotate_90k(image, quarter_turns)?, &BBox::FULL, side))
}

fn pixel_batch(rows: &[Vec<f32>]) -> Result<Tensor> {
    let width = rows.first().map_or(0, Vec::len);
    Tensor::from_vec(&[rows.len(), width], rows.concat())
}

/// Class logits for whole images, evaluated in batches.
pub fn whole_image_logits(params: &AgentNet, images: &[RgbImage]) -> Result<Vec<Vec<f32>>> {
    let side = params.dims.input_side;
    let mut out = Vec::with_capacity(images.len());
    for chunk in images.chunks(256) {
        let px = chunk.iter().map(|im| whole_image_pixels(im, side, 0)).collect::<Result<Vec<_>>>()?;
        let (_, feat) = params.encode_batch(&pixel_batch(&px)?)?;
        let pass = params.forward(&params.with_zero_history(&feat))?;
        out.extend((0..pass.logits.rows()).map(|i| pass.logits.row(i).to_vec()));
    }
    Ok(out)
}

fn whole_image_loss(params: &AgentNet, set: &SceneSet) -> Result<f64> {
    let logits = whole_image_logits(params, &set.images)?;
    let labels = set.labels();
    let flat = Tensor::from_vec(&[logits.len(), params.num_classes()], logits.concat())?;
    Ok(cross_entropy_loss(&flat, &labels)?.0)
}

/// Fraction of images whose whole-image argmax equals the label.
pub fn whole_image_top1(params: &AgentNet, set: &SceneSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidArgument("empty evaluation set".into()));
    }
    let logits = whole_image_logits(params, &set.images)?;
    let hits = logits.iter().zip(set.labels()).filter(|(l, y)| argmax(l) == *y).count();
    Ok(hits as f64 / set.len() as f64)
}

/// Classification pre-training on whole scene images with rotation
/// augmentation and a single learning-rate drop.
pub fn pretrain(config: &TrainConfig, train: &SceneSet, eval: &SceneSet, seed: u64) -> Result<(Checkpoint, PretrainReport)> {
    if train.num_classes() != eval.num_classes() || train.manifest.class_names != eval.manifest.class_names {
        return Err(Error::Config("train and eval manifests disagree on classes".into()));
    }
    if train.is_empty() || eval.is_empty() {
        return Err(Error::Config("pre-training needs non-empty train and eval sets".into()));
    }
    let mut ckpt = init_checkpoint(config, train.manifest.class_names.clone(), seed)?;
    let p = &config.pretrain;
    let side = ckpt.params.dims.input_side;
    let labels = train.labels();
    let mut rng = SplitMix64::new(ckpt.rng_state);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epochs = Vec::with_capacity(p.epochs);

    for epoch in 0..p.epochs {
        let start_loss = whole_image_loss(&ckpt.params, train)?;
        let lr = p.lr_at(epoch);
        ckpt.optimizer.learning_rate = lr;
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(p.batch) {
            let mut px = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let turns = if p.rotation_augment { rng.gen_range(0..4u8) } else { 0 };
                px.push(whole_image_pixels(&train.images[i], side, turns)?);
            }
            let y: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            ckpt.params.zero_grad();
            loss_sum += ckpt.params.classify_backward(&pixel_batch(&px)?, |logits| cross_entropy_loss(logits, &y))?;
            ckpt.optimizer.step(&mut ckpt.params)?;
            ckpt.progress.updates += 1;
            batches += 1;
        }
        let eval_top1 = whole_image_top1(&ckpt.params, eval)?;
        ckpt.progress.pretrain_epochs = epoch + 1;
        epochs.push(PretrainEpoch {
            epoch,
            lr,
            start_loss,
            mean_batch_loss: loss_sum / batches as f64,
            eval_top1,
        });
    }
    ckpt.params.zero_grad();
    ckpt.progress.stage = Stage::Pretrained;
    ckpt.rng_state = rng.state();
    let report = PretrainReport {
        final_train_loss: whole_image_loss(&ckpt.params, train)?,
        final_eval_top1: whole_image_top1(&ckpt.params, eval)?,
        epochs,
    };
    Ok((ckpt, report))
}
