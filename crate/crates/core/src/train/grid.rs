use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, train, Dataset, EvalReport, TrainConfig};
use crate::error::{PwiError, Result};
use crate::model::{Composition, InputMode, ModelConfig};
use crate::subword::Pretrained;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub name: String,
    pub model: ModelConfig,
}

/// The sixteen input variations: four word-level settings, C2W and CNN
/// compositions over char 1/2/3-grams, and the same compositions with the LM
/// objective weighted by `gamma`. Other settings come from `base`.
pub fn desk_grid(base: &ModelConfig, gamma: f64) -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(16);
    for input in [
        InputMode::WordPretrainedFixed,
        InputMode::WordPretrainedUpdated,
        InputMode::WordRandomFixed,
        InputMode::WordRandomUpdated,
    ] {
        cells.push(GridCell {
            name: input.name().to_string(),
            model: ModelConfig {
                input,
                lm_gamma: 0.0,
                ..base.clone()
            },
        });
    }
    for (lm, g) in [(false, 0.0), (true, gamma)] {
        for (input, comp) in [(InputMode::SubwordC2w, Composition::C2w), (InputMode::SubwordCnn, Composition::Cnn)] {
            for n in 1..=3 {
                let prefix = if lm { "lm-" } else { "" };
                cells.push(GridCell {
                    name: format!("{prefix}{}-{n}", input.name()),
                    model: ModelConfig {
                        input,
                        composition: comp,
                        subword_n: n,
                        lm_gamma: g,
                        ..base.clone()
                    },
                });
            }
        }
    }
    cells
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub name: String,
    pub label: String,
    pub pretrained: bool,
    pub param_count: Option<usize>,
    pub best_epoch: Option<usize>,
    /// Evaluation of the dev-selected model.
    pub best: Option<EvalReport>,
    /// Evaluation of the last-epoch model.
    pub last: Option<EvalReport>,
    pub error: Option<String>,
}

fn run_cell(dataset: &Dataset, cell: &GridCell, config: &TrainConfig, pretrained: Option<&Pretrained>) -> Result<GridRow> {
    let eval_set = dataset
        .test
        .as_ref()
        .or(dataset.dev.as_ref())
        .ok_or_else(|| PwiError::Data(format!("dataset `{}` has no test or dev split", dataset.name)))?;
    let cfg = TrainConfig {
        model: cell.model.clone(),
        ..config.clone()
    };
    let out = train(dataset, &cfg, pretrained, |_| {})?;
    Ok(GridRow {
        name: cell.name.clone(),
        label: cell.model.label(),
        pretrained: cell.model.input.pretrained(),
        param_count: Some(out.last.param_count()),
        best_epoch: Some(out.best_epoch),
        best: Some(evaluate(&out.best, eval_set)?),
        last: Some(evaluate(&out.last, eval_set)?),
        error: None,
    })
}

/// Trains and evaluates every cell on `workers` threads. Rows keep the cell
/// order; a failing cell is recorded in its row and the others continue.
pub fn run_grid(
    dataset: &Dataset,
    cells: &[GridCell],
    config: &TrainConfig,
    pretrained: Option<&Pretrained>,
    workers: usize,
) -> Result<Vec<GridRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| PwiError::invalid(format!("cannot start {workers} workers: {e}")))?;
    let rows = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                run_cell(dataset, cell, config, pretrained).unwrap_or_else(|e| {
                    log::error!("grid cell `{}` failed: {e}", cell.name);
                    GridRow {
                        name: cell.name.clone(),
                        label: cell.model.label(),
                        pretrained: cell.model.input.pretrained(),
                        param_count: None,
                        best_epoch: None,
                        best: None,
                        last: None,
                        error: Some(e.to_string()),
                    }
                })
            })
            .collect()
    });
    Ok(rows)
}

/// Table with one row per cell: model, pre-train flag, parameter count and
/// the dataset's F1 for the dev-selected and the last-epoch model.
pub fn write_grid_tsv<W: Write>(mut w: W, dataset: &str, rows: &[GridRow]) -> std::io::Result<()> {
    writeln!(
        w,
        "name\tmodel\tpre-train\tparameters\t{dataset}_f1\t{dataset}_f1_last\tbest_epoch\tstatus"
    )?;
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.name,
            r.label,
            if r.pretrained { "yes" } else { "no" },
            opt(r.param_count.map(|c| c.to_string())),
            opt(r.best.as_ref().map(|e| format!("{:.4}", e.max_f1))),
            opt(r.last.as_ref().map(|e| format!("{:.4}", e.max_f1))),
            opt(r.best_epoch.map(|e| e.to_string())),
            r.error.as_deref().unwrap_or("ok").replace(['\t', '\n'], " "),
        )?;
    }
    Ok(())
}
