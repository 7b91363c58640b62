use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::agent::RewardKind;
use crate::error::{Error, Result};
use crate::evalcli::{evaluate, evaluate_random, mean_report, EvalReport};
use crate::pipeline::{pretrain, train_joint, Checkpoint, SceneSet, TrainConfig};

pub const RANDOM_KEY: &str = "random";

/// Checkpoints produced for one seed of the ablation.
#[derive(Clone, Debug)]
pub struct SeedArtifacts {
    pub seed: u64,
    pub pretrained: Checkpoint,
    pub confidence: Checkpoint,
    pub iou: Checkpoint,
}

impl SeedArtifacts {
    pub fn joint(&self, kind: RewardKind) -> &Checkpoint {
        match kind {
            RewardKind::Confidence => &self.confidence,
            RewardKind::Iou => &self.iou,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationEntry {
    pub mean: EvalReport,
    pub per_seed: Vec<EvalReport>,
}

/// Confidence-reward, IoU-reward and random-policy results on one eval set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub eval_manifest_hash: String,
    pub seeds: Vec<u64>,
    /// Keyed by `confidence`, `iou` and `random`.
    pub entries: BTreeMap<String, AblationEntry>,
}

impl AblationReport {
    pub fn recall(&self, key: &str) -> Option<f64> {
        self.entries.get(key).and_then(|e| e.mean.recall_iou50)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let mut s = String::from("| Reward     | Recall [%] | Top-1 [%] |\n|------------|------------|-----------|\n");
        for (key, e) in &self.entries {
            let recall = e.mean.recall_iou50.map_or("n/a".into(), |r| format!("{:.2}", 100.0 * r));
            s.push_str(&format!("| {:<10} | {:>10} | {:>9.2} |\n", key, recall, 100.0 * e.mean.top1));
        }
        s
    }
}

/// Pre-trains once, then trains one agent per reward kind from the shared
/// pre-trained checkpoint.
pub fn train_seed(config: &TrainConfig, train: &SceneSet, eval: &SceneSet, seed: u64) -> Result<SeedArtifacts> {
    let (pretrained, _) = pretrain(config, train, eval, seed)?;
    let (confidence, _) = train_joint(config, &pretrained, train, seed, RewardKind::Confidence)?;
    let (iou, _) = train_joint(config, &pretrained, train, seed, RewardKind::Iou)?;
    Ok(SeedArtifacts {
        seed,
        pretrained,
        confidence,
        iou,
    })
}

/// Evaluates trained seeds and a random-policy baseline on `eval`.
pub fn ablation_report(config: &TrainConfig, eval: &SceneSet, runs: &[SeedArtifacts], threshold: f64) -> Result<AblationReport> {
    if runs.is_empty() {
        return Err(Error::Config("the ablation needs at least one seed".into()));
    }
    if !eval.manifest.has_gt_boxes() {
        return Err(Error::Config("the ablation needs ground-truth boxes in the eval manifest".into()));
    }
    let mut entries = BTreeMap::new();
    for kind in [RewardKind::Confidence, RewardKind::Iou] {
        let per_seed = runs
            .iter()
            .map(|r| evaluate(&r.joint(kind).params, &config.env, eval, threshold))
            .collect::<Result<Vec<_>>>()?;
        entries.insert(kind.name().to_string(), entry(per_seed)?);
    }
    let per_seed = runs
        .iter()
        .map(|r| evaluate_random(&r.pretrained.params, &config.env, eval, r.seed, threshold))
        .collect::<Result<Vec<_>>>()?;
    entries.insert(RANDOM_KEY.to_string(), entry(per_seed)?);
    Ok(AblationReport {
        eval_manifest_hash: eval.manifest.content_hash(),
        seeds: runs.iter().map(|r| r.seed).collect(),
        entries,
    })
}

fn entry(per_seed: Vec<EvalReport>) -> Result<AblationEntry> {
    Ok(AblationEntry {
        mean: mean_report(&per_seed)?,
        per_seed,
    })
}

pub fn ablate_rewards(config: &TrainConfig, train: &SceneSet, eval: &SceneSet, seeds: &[u64], threshold: f64) -> Result<AblationReport> {
    if !train.manifest.has_gt_boxes() || !eval.manifest.has_gt_boxes() {
        return Err(Error::Config("the ablation needs ground-truth boxes".into()));
    }
    let runs = seeds
        .iter()
        .map(|&s| train_seed(config, train, eval, s))
        .collect::<Result<Vec<_>>>()?;
    ablation_report(config, eval, &runs, threshold)
}
