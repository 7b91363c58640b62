use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::AgentNet;
use crate::error::{Error, Result};
use crate::evalcli::{iteration_stats, ranked_classes, recall_at_iou, top_k_accuracy};
use crate::locenv::{iou, EnvConfig};
use crate::pipeline::{infer_random, infer_with, InferenceResult, SceneSet};
use crate::rng::{derive_seed, SplitMix64};

pub const THREADS_ENV: &str = "RLLOGO_THREADS";
pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: usize,
    pub class_name: String,
    pub n: usize,
    pub top1: f64,
    pub recall_iou50: Option<f64>,
}

/// Classification, localization and iteration metrics over one eval set.
/// `recall_iou50` is `None` when the manifest carries no boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub top1: f64,
    pub top5: f64,
    pub recall_iou50: Option<f64>,
    pub iou_threshold: f64,
    pub iter_median: f64,
    pub iter_mean: f64,
    pub per_class: Vec<ClassReport>,
}

impl EvalReport {
    pub fn from_results(results: &[InferenceResult], set: &SceneSet, threshold: f64) -> Result<Self> {
        if results.len() != set.len() || results.is_empty() {
            return Err(Error::shape("EvalReport", set.len(), results.len()));
        }
        let labels = set.labels();
        let ranked: Vec<Vec<usize>> = results.iter().map(|r| ranked_classes(&r.logits)).collect();
        let k5 = 5.min(set.num_classes());
        let has_boxes = set.manifest.has_gt_boxes();
        let recall = if has_boxes {
            Some(recall_at_iou(results, &set.manifest, threshold)?)
        } else {
            None
        };
        let (iter_median, iter_mean) = iteration_stats(results)?;

        let mut per_class = Vec::new();
        for (class_id, class_name) in set.manifest.class_names.iter().enumerate() {
            let idx: Vec<usize> = (0..results.len()).filter(|&i| labels[i] == class_id).collect();
            if idx.is_empty() {
                continue;
            }
            let hits = idx.iter().filter(|&&i| ranked[i][0] == class_id).count();
            let recall_iou50 = has_boxes.then(|| {
                let loc = idx
                    .iter()
                    .filter(|&&i| {
                        let gt = set.manifest.records[i].gt_box.as_ref().expect("checked above");
                        iou(&results[i].final_box, gt) >= threshold
                    })
                    .count();
                loc as f64 / idx.len() as f64
            });
            per_class.push(ClassReport {
                class_id,
                class_name: class_name.clone(),
                n: idx.len(),
                top1: hits as f64 / idx.len() as f64,
                recall_iou50,
            });
        }
        Ok(Self {
            n: results.len(),
            top1: top_k_accuracy(&ranked, &labels, 1)?,
            top5: top_k_accuracy(&ranked, &labels, k5)?,
            recall_iou50: recall,
            iou_threshold: threshold,
            iter_median,
            iter_mean,
            per_class,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering in the layout of the paper's tables.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let pct = |v: f64| format!("{:6.2}", 100.0 * v);
        let recall = self.recall_iou50.map_or("   n/a".to_string(), pct);
        let _ = writeln!(s, "| n    | Top-1 [%] | Top-5 [%] | Recall [%] | Median | Mean  |");
        let _ = writeln!(s, "|------|-----------|-----------|------------|--------|-------|");
        let _ = writeln!(
            s,
            "| {:<4} | {:>9} | {:>9} | {:>10} | {:>6.1} | {:>5.1} |",
            self.n,
            pct(self.top1),
            pct(self.top5),
            recall,
            self.iter_median,
            self.iter_mean
        );
        s
    }
}

/// Thread count for evaluation: `RLLOGO_THREADS` if set and positive,
/// otherwise all cores.
pub fn eval_threads() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn par_map<F>(n: usize, f: F) -> Result<Vec<InferenceResult>>
where
    F: Fn(usize) -> Result<InferenceResult> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(eval_threads())
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    // collect keeps input order, so reports do not depend on scheduling
    pool.install(|| (0..n).into_par_iter().map(f).collect())
}

/// Greedy inference on every scene, in manifest order.
pub fn run_inference(params: &AgentNet, env: &EnvConfig, set: &SceneSet) -> Result<Vec<InferenceResult>> {
    par_map(set.len(), |i| infer_with(params, env, &set.images[i]))
}

pub fn evaluate(params: &AgentNet, env: &EnvConfig, set: &SceneSet, threshold: f64) -> Result<EvalReport> {
    EvalReport::from_results(&run_inference(params, env, set)?, set, threshold)
}

/// Random-policy baseline; each scene gets its own stream derived from
/// `seed` and its position, so the result is independent of threading.
pub fn evaluate_random(params: &AgentNet, env: &EnvConfig, set: &SceneSet, seed: u64, threshold: f64) -> Result<EvalReport> {
    let results = par_map(set.len(), |i| {
        let mut rng = SplitMix64::new(derive_seed(seed, 0x7a4d, i as u64));
        infer_random(params, env, &set.images[i], &mut rng)
    })?;
    EvalReport::from_results(&results, set, threshold)
}

/// Mean of per-seed reports; per-class rows are averaged by class id.
pub fn mean_report(reports: &[EvalReport]) -> Result<EvalReport> {
    let first = reports.first().ok_or_else(|| Error::InvalidArgument("no reports to average".into()))?;
    let k = reports.len() as f64;
    let avg = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(f).sum::<f64>() / k;
    let recall = if reports.iter().all(|r| r.recall_iou50.is_some()) {
        Some(avg(&|r| r.recall_iou50.unwrap_or(0.0)))
    } else {
        None
    };
    let per_class = first
        .per_class
        .iter()
        .map(|c| {
            let rows: Vec<&ClassReport> = reports
                .iter()
                .filter_map(|r| r.per_class.iter().find(|x| x.class_id == c.class_id))
                .collect();
            let m = rows.len() as f64;
            ClassReport {
                class_id: c.class_id,
                class_name: c.class_name.clone(),
                n: c.n,
                top1: rows.iter().map(|x| x.top1).sum::<f64>() / m,
                recall_iou50: c
                    .recall_iou50
                    .map(|_| rows.iter().map(|x| x.recall_iou50.unwrap_or(0.0)).sum::<f64>() / m),
            }
        })
        .collect();
    Ok(EvalReport {
        n: first.n,
        top1: avg(&|r| r.top1),
        top5: avg(&|r| r.top5),
        recall_iou50: recall,
        iou_threshold: first.iou_threshold,
        iter_median: avg(&|r| r.iter_median),
        iter_mean: avg(&|r| r.iter_mean),
        per_class,
    })
}

