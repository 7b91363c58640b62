use crate::error::{Error, Result};
use crate::locenv::iou;
use crate::pipeline::InferenceResult;
use crate::synthgen::DatasetManifest;

/// Class ids sorted by descending logit; ties go to the lower id.
pub fn ranked_classes(logits: &[f32]) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..logits.len()).collect();
    ids.sort_by(|&a, &b| logits[b].total_cmp(&logits[a]).then(a.cmp(&b)));
    ids
}

/// Fraction of scenes whose label is among the first `k` ranked classes.
pub fn top_k_accuracy(ranked: &[Vec<usize>], labels: &[usize], k: usize) -> Result<f64> {
    if ranked.is_empty() {
        return Err(Error::InvalidArgument("top-k accuracy of an empty set".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if ranked.len() != labels.len() {
        return Err(Error::shape("top_k_accuracy", ranked.len(), labels.len()));
    }
    if let Some(short) = ranked.iter().find(|r| r.len() < k) {
        return Err(Error::InvalidArgument(format!("ranking of length {} for k = {k}", short.len())));
    }
    let hits = ranked.iter().zip(labels).filter(|(r, y)| r[..k].contains(y)).count();
    Ok(hits as f64 / ranked.len() as f64)
}

/// Fraction of results whose final box reaches `threshold` IoU with the
/// ground truth, ignoring the class.
pub fn recall_at_iou(results: &[InferenceResult], manifest: &DatasetManifest, threshold: f64) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("recall of an empty set".into()));
    }
    if results.len() != manifest.len() {
        return Err(Error::shape("recall_at_iou", manifest.len(), results.len()));
    }
    let mut hits = 0;
    for (r, rec) in results.iter().zip(&manifest.records) {
        let gt = rec
            .gt_box
            .as_ref()
            .ok_or_else(|| Error::Config(format!("record {} has no ground-truth box", rec.id)))?;
        hits += usize::from(iou(&r.final_box, gt) >= threshold);
    }
    Ok(hits as f64 / results.len() as f64)
}

/// Median (mean of the middle pair for even counts) and mean.
pub fn median_mean(values: &[usize]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("statistics of an empty set".into()));
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    let median = if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] + v[n / 2]) as f64 / 2.0
    };
    Ok((median, v.iter().sum::<usize>() as f64 / n as f64))
}

/// Median and mean of the number of box transformations per episode.
pub fn iteration_stats(results: &[InferenceResult]) -> Result<(f64, f64)> {
    median_mean(&results.iter().map(|r| r.steps).collect::<Vec<_>>())
}
