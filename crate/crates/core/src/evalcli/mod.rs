//! Metrics, reports, trajectory rendering, the reward ablation and the CLI.

mod ablate;
mod cli;
mod metrics;
mod render;
mod report;

pub use ablate::{ablate_rewards, ablation_report, train_seed, AblationEntry, AblationReport, SeedArtifacts, RANDOM_KEY};
pub use cli::{cli_main, EXIT_OK, EXIT_RUNTIME, EXIT_USAGE};
pub use metrics::{iteration_stats, median_mean, ranked_classes, recall_at_iou, top_k_accuracy};
pub use render::{annotate_trace, box_pixels, draw_box, render_trace, FINAL_COLOR, INTERMEDIATE_COLOR};
pub use report::{
    eval_threads, evaluate, evaluate_random, mean_report, run_inference, ClassReport, EvalReport,
    DEFAULT_IOU_THRESHOLD, THREADS_ENV,
};
