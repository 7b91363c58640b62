use std::path::Path;
use std::process::Command;

use rllogo::evalcli::{cli_main, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};

fn run(args: &[&str]) -> i32 {
    cli_main(std::iter::once("rllogo").chain(args.iter().copied()))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rllogo"))
}

fn count_files(dir: &Path) -> usize {
    std::fs::read_dir(dir).unwrap().count()
}

#[test]
fn usage_errors() {
    assert_eq!(run(&[]), EXIT_USAGE);
    assert_eq!(run(&["frobnicate"]), EXIT_USAGE);
    assert_eq!(run(&["infer", "--ckpt"]), EXIT_USAGE);
    assert_eq!(run(&["--help"]), EXIT_OK);
    assert_eq!(run(&["eval", "--help"]), EXIT_OK);
}

#[test]
fn binary_exit_codes() {
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    let out = bin().args(["infer", "--ckpt", "/nonexistent.bin", "--image", "/nonexistent.ppm"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn end_to_end_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let data = d.join("data");
    let data_s = data.to_str().unwrap();
    assert_eq!(
        run(&["gen", "--classes", "3", "--train", "12", "--eval", "6", "--seed", "42", "--out", data_s]),
        EXIT_OK
    );
    assert_eq!(count_files(&data.join("images")), 18);
    assert!(data.join("train.jsonl").exists() && data.join("eval.jsonl").exists());

    let mut cfg = rllogo::pipeline::TrainConfig::default();
    cfg.model.trunk_width = 16;
    cfg.model.feature_dim = 8;
    cfg.env.encoder_input_side = 8;
    cfg.pretrain.epochs = 1;
    cfg.pretrain.drop_epoch = 0;
    cfg.joint.epochs = 1;
    cfg.joint.batch = 4;
    cfg.joint.replay_capacity = 16;
    cfg.joint.scenes_per_epoch = Some(2);
    cfg.seeds = vec![1];
    let cfg_path = d.join("config.json");
    std::fs::write(&cfg_path, cfg.to_json()).unwrap();
    let cfg_s = cfg_path.to_str().unwrap();

    let pre = d.join("pre.bin");
    let pre_s = pre.to_str().unwrap();
    assert_eq!(run(&["pretrain", "--data", data_s, "--config", cfg_s, "--seed", "1", "--out", pre_s]), EXIT_OK);
    let joint = d.join("joint.bin");
    let joint_s = joint.to_str().unwrap();
    assert_eq!(
        run(&["train-joint", "--data", data_s, "--ckpt", pre_s, "--reward", "iou", "--seed", "1", "--out", joint_s]),
        EXIT_OK
    );

    let image = data.join("images/eval-000000.ppm");
    let out = bin()
        .args(["infer", "--ckpt", joint_s, "--image", image.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    keys.sort();
    assert_eq!(keys, vec!["box", "class_id", "class_name", "steps", "triggered"]);
    assert_eq!(v["box"].as_array().unwrap().len(), 4);
    assert!(v["steps"].as_u64().unwrap() <= 40);

    let report = d.join("report.json");
    let manifest = data.join("eval.jsonl");
    assert_eq!(
        run(&["eval", "--ckpt", joint_s, "--manifest", manifest.to_str().unwrap(), "--out", report.to_str().unwrap()]),
        EXIT_OK
    );
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["n"], 6);
    for k in ["top1", "top5", "recall_iou50", "iter_median", "iter_mean", "per_class"] {
        assert!(r.get(k).is_some(), "{k}");
    }

    let viz = d.join("viz.ppm");
    assert_eq!(
        run(&["viz", "--ckpt", joint_s, "--image", image.to_str().unwrap(), "--out", viz.to_str().unwrap()]),
        EXIT_OK
    );
    assert!(rllogo::synthgen::RgbImage::read_ppm(&viz).is_ok());

    let ablation = d.join("ablation.json");
    assert_eq!(
        run(&["ablate-rewards", "--data", data_s, "--config", cfg_s, "--out", ablation.to_str().unwrap()]),
        EXIT_OK
    );
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ablation).unwrap()).unwrap();
    assert_eq!(a["entries"].as_object().unwrap().len(), 3);

    assert_eq!(run(&["pretrain", "--data", "/nonexistent", "--out", pre_s]), EXIT_RUNTIME);
    let bad_cfg = d.join("bad.json");
    std::fs::write(&bad_cfg, r#"{"pretrain": {}}"#).unwrap();
    assert_eq!(
        run(&["pretrain", "--data", data_s, "--config", bad_cfg.to_str().unwrap(), "--out", pre_s]),
        EXIT_RUNTIME
    );
}
