use serde::{Deserialize, Serialize};

use crate::agent::RewardKind;
use crate::error::{Error, Result};
use crate::evalcli::{evaluate, mean_report, EvalReport, DEFAULT_IOU_THRESHOLD};
use crate::pipeline::{pretrain, train_joint, SceneSet, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub pretrain_top1: f64,
    #[serde(flatten)]
    pub eval: EvalReport,
}

/// Mean metrics over seeds plus one row per seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourShotReport {
    pub reward_kind: RewardKind,
    pub top1: f64,
    pub top5: f64,
    pub recall_iou50: Option<f64>,
    pub iter_median: f64,
    pub iter_mean: f64,
    pub per_seed: Vec<SeedRun>,
}

impl FourShotReport {
    pub fn from_runs(reward_kind: RewardKind, per_seed: Vec<SeedRun>) -> Result<Self> {
        let reports: Vec<EvalReport> = per_seed.iter().map(|r| r.eval.clone()).collect();
        let mean = mean_report(&reports)?;
        Ok(Self {
            reward_kind,
            top1: mean.top1,
            top5: mean.top5,
            recall_iou50: mean.recall_iou50,
            iter_median: mean.iter_median,
            iter_mean: mean.iter_mean,
            per_seed,
        })
    }
}

/// Pre-training, joint training and evaluation for every configured seed.
pub fn run_4shot(config: &TrainConfig, train: &SceneSet, eval: &SceneSet, kind: RewardKind) -> Result<FourShotReport> {
    if config.seeds.is_empty() {
        return Err(Error::Config("at least one seed is required".into()));
    }
    let mut runs = Vec::with_capacity(config.seeds.len());
    for &seed in &config.seeds {
        let (pre, pre_report) = pretrain(config, train, eval, seed)?;
        let (joint, _) = train_joint(config, &pre, train, seed, kind)?;
        runs.push(SeedRun {
            seed,
            pretrain_top1: pre_report.final_eval_top1,
            eval: evaluate(&joint.params, &config.env, eval, DEFAULT_IOU_THRESHOLD)?,
        });
    }
    FourShotReport::from_runs(kind, runs)
}
