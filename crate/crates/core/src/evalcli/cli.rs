use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::agent::RewardKind;
use crate::error::{Error, Result};
use crate::evalcli::{ablate_rewards, evaluate, render_trace, DEFAULT_IOU_THRESHOLD};
use crate::locenv::BBox;
use crate::pipeline::{infer, load_checkpoint, pretrain, save_checkpoint, train_joint, SceneSet, TrainConfig};
use crate::synthgen::{generate_dataset, GenConfig, RgbImage};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "rllogo", version, about = "Logo localization and recognition with a confidence-guided DQN agent")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON config file (a TrainConfig, or a GenConfig for `gen`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path (file or directory, depending on the subcommand).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic logo-scene dataset.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        classes: Option<usize>,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        eval: Option<usize>,
        #[arg(long)]
        scale_min: Option<f64>,
        #[arg(long)]
        scale_max: Option<f64>,
    },
    /// Whole-image classification pre-training.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Dataset directory holding train.jsonl and eval.jsonl.
        #[arg(long)]
        data: PathBuf,
        /// Where to write the per-epoch report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Joint localization + classification training.
    TrainJoint {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Pre-trained checkpoint.
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, default_value = "confidence")]
        reward: RewardKind,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Localize and classify one image; prints JSON.
    Infer {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Evaluate a checkpoint on a manifest; prints the JSON report.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        /// Manifest (JSON lines) to evaluate on.
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou_threshold: f64,
        /// Also print a plain-text table.
        #[arg(long)]
        table: bool,
    },
    /// Draw the inference trajectory of one image as a PPM.
    Viz {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        image: PathBuf,
    },
    /// Compare confidence and IoU rewards against a random policy.
    AblateRewards {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
        iou_threshold: f64,
        #[arg(long)]
        table: bool,
    },
}

#[derive(Serialize)]
struct InferOutput<'a> {
    class_id: usize,
    class_name: &'a str,
    #[serde(rename = "box")]
    bbox: BBox,
    steps: usize,
    triggered: bool,
}

fn train_config(common: &Common) -> Result<TrainConfig> {
    match &common.config {
        Some(p) => TrainConfig::load(p),
        None => Ok(TrainConfig::default()),
    }
}

fn required_out<'a>(common: &'a Common, what: &str) -> Result<&'a Path> {
    common
        .out
        .as_deref()
        .ok_or_else(|| Error::InvalidArgument(format!("--out is required ({what})")))
}

fn write_json(path: &Path, json: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, format!("{json}\n")).map_err(|e| Error::io(path, e))
}

fn load_splits(data: &Path) -> Result<(SceneSet, SceneSet)> {
    Ok((SceneSet::load(&data.join("train.jsonl"))?, SceneSet::load(&data.join("eval.jsonl"))?))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Gen {
            common,
            classes,
            train,
            eval,
            scale_min,
            scale_max,
        } => {
            let mut cfg = match &common.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
                }
                None => GenConfig::new(10, 2000, 500, (0.15, 0.9), 0),
            };
            cfg.num_classes = classes.unwrap_or(cfg.num_classes);
            cfg.n_train = train.unwrap_or(cfg.n_train);
            cfg.n_eval = eval.unwrap_or(cfg.n_eval);
            cfg.scale_range = (scale_min.unwrap_or(cfg.scale_range.0), scale_max.unwrap_or(cfg.scale_range.1));
            cfg.seed = common.seed.unwrap_or(cfg.seed);
            let (tr, ev) = generate_dataset(&cfg, required_out(&common, "dataset directory")?)?;
            eprintln!("wrote {} train and {} eval scenes", tr.len(), ev.len());
        }
        Command::Pretrain { common, data, report } => {
            let cfg = train_config(&common)?;
            let out = required_out(&common, "checkpoint path")?;
            let (train, eval) = load_splits(&data)?;
            let (ckpt, rep) = pretrain(&cfg, &train, &eval, common.seed.unwrap_or(0))?;
            save_checkpoint(&ckpt, out)?;
            if let Some(p) = report {
                write_json(&p, &serde_json::to_string_pretty(&rep)?)?;
            }
            eprintln!("eval top-1 {:.4}", rep.final_eval_top1);
        }
        Command::TrainJoint {
            common,
            data,
            ckpt,
            reward,
            report,
        } => {
            let out = required_out(&common, "checkpoint path")?;
            let pre = load_checkpoint(&ckpt)?;
            let cfg = match &common.config {
                Some(p) => TrainConfig::load(p)?,
                None => pre.config.clone(),
            };
            let train = SceneSet::load(&data.join("train.jsonl"))?;
            let seed = common.seed.unwrap_or(pre.progress.seed);
            let (joint, rep) = train_joint(&cfg, &pre, &train, seed, reward)?;
            save_checkpoint(&joint, out)?;
            if let Some(p) = report {
                write_json(&p, &serde_json::to_string_pretty(&rep)?)?;
            }
        }
        Command::Infer { common, ckpt, image } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let img = RgbImage::read_ppm(&image)?;
            let result = infer(&ckpt, &img)?;
            let out = InferOutput {
                class_id: result.predicted_class,
                class_name: ckpt.class_name(result.predicted_class),
                bbox: result.final_box,
                steps: result.steps,
                triggered: result.triggered,
            };
            println!("{}", serde_json::to_string(&out)?);
            if let Some(p) = &common.out {
                write_json(p, &serde_json::to_string_pretty(&result.trace)?)?;
            }
        }
        Command::Eval {
            common,
            ckpt,
            manifest,
            iou_threshold,
            table,
        } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let env = match &common.config {
                Some(p) => TrainConfig::load(p)?.env,
                None => ckpt.config.env.clone(),
            };
            let set = SceneSet::load(&manifest)?;
            let report = evaluate(&ckpt.params, &env, &set, iou_threshold)?;
            let json = report.to_json();
            match &common.out {
                Some(p) => write_json(p, &json)?,
                None => println!("{json}"),
            }
            if table {
                print!("{}", report.to_table());
            }
        }
        Command::Viz { common, ckpt, image } => {
            let ckpt = load_checkpoint(&ckpt)?;
            let img = RgbImage::read_ppm(&image)?;
            let result = infer(&ckpt, &img)?;
            render_trace(&img, &result.trace, required_out(&common, "PPM path")?)?;
        }
        Command::AblateRewards {
            common,
            data,
            iou_threshold,
            table,
        } => {
            let cfg = train_config(&common)?;
            let (train, eval) = load_splits(&data)?;
            let seeds = common.seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            let report = ablate_rewards(&cfg, &train, &eval, &seeds, iou_threshold)?;
            let json = report.to_json();
            match &common.out {
                Some(p) => write_json(p, &json)?,
                None => println!("{json}"),
            }
            if table {
                print!("{}", report.to_table());
            }
        }
    }
    Ok(())
}

/// Parses `argv` (including the program name) and runs the subcommand.
/// Returns 0 on success, 1 on a usage error and 2 on a runtime error.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match run(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
