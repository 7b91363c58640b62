mod common;

use common::{tiny_config, tiny_dataset};
use proptest::prelude::*;
use rand::Rng;
use rllogo::evalcli::*;
use rllogo::locenv::{iou, BBox};
use rllogo::pipeline::*;
use rllogo::rng::SplitMix64;
use rllogo::synthgen::RgbImage;

fn result_with(final_box: BBox, steps: usize) -> InferenceResult {
    InferenceResult {
        predicted_class: 0,
        final_box,
        trace: EpisodeTrace::default(),
        triggered: true,
        steps,
        logits: vec![0.0; 3],
    }
}

#[test]
fn random_rankings_hit_chance_level() {
    let mut rng = SplitMix64::new(99);
    let n = 10_000;
    let mut ranked = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let logits: Vec<f32> = (0..10).map(|_| rng.gen()).collect();
        ranked.push(ranked_classes(&logits));
        labels.push(rng.gen_range(0..10));
    }
    let top1 = top_k_accuracy(&ranked, &labels, 1).unwrap();
    assert!((top1 - 0.1).abs() <= 0.02, "top1 {top1}");
    let top5 = top_k_accuracy(&ranked, &labels, 5).unwrap();
    assert!((top5 - 0.5).abs() <= 0.03, "top5 {top5}");
}

#[test]
fn label_always_third() {
    let ranked = vec![vec![4, 1, 7, 0, 2]; 20];
    let labels = vec![7; 20];
    assert_eq!(top_k_accuracy(&ranked, &labels, 1).unwrap(), 0.0);
    assert_eq!(top_k_accuracy(&ranked, &labels, 5).unwrap(), 1.0);
}

#[test]
fn recall_examples() {
    let dir = tempfile::tempdir().unwrap();
    let (_, eval) = tiny_dataset(dir.path(), 21);
    let exact: Vec<_> = eval.manifest.records.iter().map(|r| result_with(r.gt_box.unwrap(), 0)).collect();
    assert_eq!(recall_at_iou(&exact, &eval.manifest, 0.5).unwrap(), 1.0);

    let mut small = eval.manifest.clone();
    for r in &mut small.records {
        r.gt_box = Some(BBox::new(0.4, 0.4, 0.6, 0.6).unwrap());
    }
    let full: Vec<_> = small.records.iter().map(|_| result_with(BBox::FULL, 0)).collect();
    let gt = small.records[0].gt_box.unwrap();
    assert!((iou(&BBox::FULL, &gt) - 0.04).abs() < 1e-6);
    assert_eq!(recall_at_iou(&full, &small, 0.5).unwrap(), 0.0);
    assert_eq!(recall_at_iou(&full, &small, 0.0).unwrap(), 1.0);

    let mut missing = eval.manifest.clone();
    missing.records[0].gt_box = None;
    assert!(recall_at_iou(&exact, &missing, 0.5).is_err());
}

#[test]
fn iteration_stats_examples() {
    let rs: Vec<_> = [0, 0, 1, 9].iter().map(|&s| result_with(BBox::FULL, s)).collect();
    assert_eq!(iteration_stats(&rs).unwrap(), (0.5, 2.5));
    assert_eq!(iteration_stats(&[result_with(BBox::FULL, 40)]).unwrap(), (40.0, 40.0));
    assert!(iteration_stats(&[]).is_err());
}

proptest! {
    #[test]
    fn stats_match_a_naive_reference(values in prop::collection::vec(0usize..=40, 1..60)) {
        let (median, mean) = median_mean(&values).unwrap();
        let mut sorted = values.clone();
        sorted.sort();
        let n = sorted.len();
        let naive_median = if n % 2 == 0 {
            (sorted[n / 2 - 1] as f64 + sorted[n / 2] as f64) / 2.0
        } else {
            sorted[n / 2] as f64
        };
        let naive_mean = values.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        prop_assert_eq!(median, naive_median);
        prop_assert!((mean - naive_mean).abs() < 1e-12);
    }

    #[test]
    fn recall_is_monotone_in_the_threshold(seed in 0u64..1000) {
        let mut rng = SplitMix64::new(seed);
        let dir = tempfile::tempdir().unwrap();
        let (_, eval) = tiny_dataset(dir.path(), 22);
        let results: Vec<_> = eval.manifest.records.iter().map(|_| {
            let x = rng.gen_range(0.0..0.5);
            let y = rng.gen_range(0.0..0.5);
            result_with(BBox::new(x, y, x + rng.gen_range(0.1..0.5), y + rng.gen_range(0.1..0.5)).unwrap(), 0)
        }).collect();
        let mut last = 1.0;
        for t in [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0] {
            let r = recall_at_iou(&results, &eval.manifest, t).unwrap();
            prop_assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn rendered_boxes_stay_on_the_canvas(x1 in 0.0..0.9f64, y1 in 0.0..0.9f64, w in 0.05..1.0f64, h in 0.05..1.0f64, side in 8usize..80) {
        let b = BBox::new(x1, y1, (x1 + w).min(1.0), (y1 + h).min(1.0)).unwrap();
        let (px1, py1, px2, py2) = box_pixels(&b, side, side);
        prop_assert!(px1 <= px2 && px2 < side && py1 <= py2 && py2 < side);
    }
}

fn trained(dir: &std::path::Path) -> (Checkpoint, SceneSet) {
    let (train, eval) = tiny_dataset(dir, 23);
    let cfg = tiny_config();
    let (pre, _) = pretrain(&cfg, &train, &eval, 0).unwrap();
    let (joint, _) = train_joint(&cfg, &pre, &train, 0, rllogo::agent::RewardKind::Confidence).unwrap();
    (joint, eval)
}

#[test]
fn reports_are_consistent_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt, eval) = trained(dir.path());
    let a = evaluate(&ckpt.params, &ckpt.config.env, &eval, 0.5).unwrap();
    let b = evaluate(&ckpt.params, &ckpt.config.env, &eval, 0.5).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert!(a.top1 <= a.top5);
    for v in [a.top1, a.top5, a.recall_iou50.unwrap()] {
        assert!((0.0..=1.0).contains(&v));
    }
    assert!(a.iter_mean <= 40.0 && a.iter_median <= 40.0);
    assert_eq!(a.per_class.iter().map(|c| c.n).sum::<usize>(), a.n);
    assert!(a.to_table().contains("Top-1"));

    let rng_a = evaluate_random(&ckpt.params, &ckpt.config.env, &eval, 4, 0.5).unwrap();
    let rng_b = evaluate_random(&ckpt.params, &ckpt.config.env, &eval, 4, 0.5).unwrap();
    assert_eq!(rng_a, rng_b);
    assert_eq!((rng_a.iter_median, rng_a.iter_mean), (40.0, 40.0));
    assert_eq!(mean_report(&[a.clone()]).unwrap(), a);
}

#[test]
fn render_contract() {
    let dir = tempfile::tempdir().unwrap();
    let (ckpt, eval) = trained(dir.path());
    let img = &eval.images[0];
    let r = infer(&ckpt, img).unwrap();
    let out = dir.path().join("viz/trace.ppm");
    render_trace(img, &r.trace, &out).unwrap();
    let back = RgbImage::read_ppm(&out).unwrap();
    assert_eq!((back.width(), back.height()), (img.width(), img.height()));
    let (x1, y1, x2, y2) = box_pixels(&r.final_box, img.width(), img.height());
    for x in x1..=x2 {
        assert_eq!(back.get(x, y1), FINAL_COLOR);
        assert_eq!(back.get(x, y2), FINAL_COLOR);
    }
    for y in y1..=y2 {
        assert_eq!(back.get(x1, y), FINAL_COLOR);
        assert_eq!(back.get(x2, y), FINAL_COLOR);
    }

    let single = EpisodeTrace {
        steps: vec![r.trace.steps[0].clone()],
    };
    let framed = annotate_trace(img, &single).unwrap();
    let n = img.width();
    for i in 0..n {
        assert_eq!(framed.get(i, 0), FINAL_COLOR);
        assert_eq!(framed.get(0, i), FINAL_COLOR);
        assert_eq!(framed.get(i, n - 1), FINAL_COLOR);
    }
    assert_eq!(framed.get(n / 2, n / 2), img.get(n / 2, n / 2));
    assert!(annotate_trace(img, &EpisodeTrace::default()).is_err());
}

#[test]
fn ablation_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (train, eval) = tiny_dataset(dir.path(), 24);
    let cfg = tiny_config();
    let report = ablate_rewards(&cfg, &train, &eval, &[1], 0.5).unwrap();
    let keys: Vec<&str> = report.entries.keys().map(String::as_str).collect();
    assert_eq!(keys, vec!["confidence", "iou", RANDOM_KEY]);
    assert_eq!(report.eval_manifest_hash, eval.manifest.content_hash());
    for e in report.entries.values() {
        assert_eq!(e.per_seed.len(), 1);
        assert_eq!(e.mean.n, eval.len());
    }
    assert!(report.to_table().contains("random"));
}
