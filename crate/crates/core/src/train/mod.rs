//! Training loop, the evaluation protocol (PR curve, max F1) and grid runs.

mod eval;
mod grid;
mod trainer;

pub use eval::{accuracy, evaluate, max_f1, report_from_scores, score_records, EvalReport, PrCurve, PrPoint};
pub use grid::{desk_grid, run_grid, write_grid_tsv, GridCell, GridRow};
pub use trainer::{holdout, train, write_metrics_jsonl, Dataset, EpochMetrics, TrainConfig, TrainOutcome, Trainer};
