use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pwi_core::data::{
    load_pairs, nearest_neighbors, ngram_lr_baseline, oov_stats, overlap_stats, vocabulary_vectors, PairFilter,
    SentencePairRecord,
};
use pwi_core::model::{load_checkpoint, save_checkpoint, PwiModel};
use pwi_core::subword::{load_pretrained, Pretrained};
use pwi_core::train::{
    desk_grid, evaluate, run_grid, train as train_model, write_grid_tsv, write_metrics_jsonl, Dataset, EvalReport,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{AnalyzeKind, CliError};

pub struct Context {
    pub cfg: RunConfig,
    pub out_dir: PathBuf,
    pub workers: usize,
}

#[derive(Serialize)]
struct OutputFile {
    file: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    outputs: Vec<OutputFile>,
}

/// Collects the files a command writes and lists them in `manifest.json`.
struct Outputs<'a> {
    ctx: &'a Context,
    files: Vec<String>,
}

impl<'a> Outputs<'a> {
    fn new(ctx: &'a Context) -> Result<Self, CliError> {
        fs::create_dir_all(&ctx.out_dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", ctx.out_dir.display())))?;
        Ok(Outputs { ctx, files: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.ctx.out_dir.join(name)
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Run(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish(self, command: &str) -> Result<(), CliError> {
        let outputs = self
            .files
            .iter()
            .map(|f| {
                let bytes = fs::metadata(self.ctx.out_dir.join(f))?.len();
                Ok(OutputFile { file: f.clone(), bytes })
            })
            .collect::<std::io::Result<Vec<_>>>()?;
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed: self.ctx.cfg.train.seed,
            config: &self.ctx.cfg,
            outputs,
        };
        let mut w = BufWriter::new(File::create(self.ctx.out_dir.join("manifest.json"))?);
        serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| CliError::Run(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        println!("wrote {} files to {}", self.files.len() + 1, self.ctx.out_dir.display());
        Ok(())
    }
}

fn load_split(cfg: &RunConfig, path: &Path) -> Result<Vec<SentencePairRecord>, CliError> {
    let path = cfg.resolve(path);
    let report = load_pairs(&path, cfg.load_options()?)?;
    if !report.malformed.is_empty() {
        log::warn!("{}: skipped {} malformed lines", path.display(), report.malformed.len());
    }
    if report.debatable > 0 {
        log::info!("{}: dropped {} debatable pairs", path.display(), report.debatable);
    }
    Ok(report.records)
}

fn load_dataset(cfg: &RunConfig) -> Result<Dataset, CliError> {
    let train = cfg
        .data
        .train
        .as_deref()
        .ok_or_else(|| CliError::Config("data.train is not set".into()))?;
    let optional = |p: &Option<PathBuf>| p.as_deref().map(|p| load_split(cfg, p)).transpose();
    Ok(Dataset {
        name: cfg.data.name.clone(),
        train: load_split(cfg, train)?,
        dev: optional(&cfg.data.dev)?,
        test: optional(&cfg.data.test)?,
    })
}

fn load_vectors(cfg: &RunConfig) -> Result<Option<Pretrained>, CliError> {
    match &cfg.data.pretrained {
        Some(p) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
            Ok(Some(load_pretrained(&cfg.resolve(p), &mut rng)?))
        }
        None => Ok(None),
    }
}

fn load_model(path: &Path) -> Result<PwiModel, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!("checkpoint {} does not exist", path.display())));
    }
    load_checkpoint(path).map_err(|e| CliError::Config(e.to_string()))
}

fn write_report(out: &mut Outputs<'_>, prefix: &str, report: &EvalReport) -> Result<(), CliError> {
    out.json(&format!("{prefix}_report.json"), report)?;
    let mut w = out.create(&format!("{prefix}_pr.tsv"))?;
    report.curve.write_tsv(&mut w)?;
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    best_epoch: usize,
    epochs: usize,
    param_count: usize,
    train_pairs: usize,
    dev_pairs: usize,
}

pub fn train(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let tc = cfg.train_config()?;
    let dataset = load_dataset(cfg)?;
    let vectors = load_vectors(cfg)?;
    let outcome = train_model(&dataset, &tc, vectors.as_ref(), |m| {
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:.3}  dev F1 {}",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            m.dev_max_f1.map_or("-".to_string(), |f| format!("{f:.4}"))
        );
    })?;
    let mut out = Outputs::new(ctx)?;
    let mut w = out.create("metrics.jsonl")?;
    write_metrics_jsonl(&mut w, &outcome.metrics)?;
    w.flush()?;
    save_checkpoint(&outcome.last, &out.path("last.ckpt"))?;
    save_checkpoint(&outcome.best, &out.path("best.ckpt"))?;
    out.json(
        "summary.json",
        &TrainSummary {
            best_epoch: outcome.best_epoch,
            epochs: outcome.metrics.len(),
            param_count: outcome.best.param_count(),
            train_pairs: outcome.train.len(),
            dev_pairs: outcome.dev.len(),
        },
    )?;
    if let Some(test) = &dataset.test {
        let report = evaluate(&outcome.best, test)?;
        println!("test max F1 {:.4} at threshold {:.4}", report.max_f1, report.threshold);
        write_report(&mut out, "test", &report)?;
    }
    out.finish("train")
}

pub fn eval(ctx: &Context, checkpoint: &Path, test: Option<&Path>) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let model = load_model(checkpoint)?;
    let test_path = test
        .map(Path::to_path_buf)
        .or_else(|| cfg.data.test.clone())
        .ok_or_else(|| CliError::Config("no test set: pass --test or set data.test".into()))?;
    let records = load_split(cfg, &test_path)?;
    let report = evaluate(&model, &records)?;
    println!(
        "max F1 {:.4} at threshold {:.4}, accuracy {:.4}, {} parameters",
        report.max_f1, report.threshold, report.accuracy, report.param_count
    );
    let mut out = Outputs::new(ctx)?;
    write_report(&mut out, "eval", &report)?;
    out.finish("eval")
}

pub fn grid(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let tc = cfg.train_config()?;
    let mut cells = desk_grid(&tc.model, cfg.grid.gamma);
    if !cfg.grid.cells.is_empty() {
        let known: BTreeSet<&str> = cells.iter().map(|c| c.name.as_str()).collect();
        if let Some(bad) = cfg.grid.cells.iter().find(|c| !known.contains(c.as_str())) {
            return Err(CliError::Config(format!(
                "unknown grid cell `{bad}` (known: {})",
                known.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        cells.retain(|c| cfg.grid.cells.contains(&c.name));
    }
    let dataset = load_dataset(cfg)?;
    let vectors = load_vectors(cfg)?;
    let rows = run_grid(&dataset, &cells, &tc, vectors.as_ref(), ctx.workers)?;
    let mut out = Outputs::new(ctx)?;
    let mut w = out.create("grid.tsv")?;
    write_grid_tsv(&mut w, &dataset.name, &rows)?;
    w.flush()?;
    out.json("grid.json", &rows)?;
    let failed = rows.iter().filter(|r| r.error.is_some()).count();
    if failed > 0 {
        eprintln!("pwi: {failed} of {} grid cells failed; see grid.tsv", rows.len());
    }
    out.finish("grid")
}

fn splits(cfg: &RunConfig) -> Result<Vec<(&'static str, Vec<SentencePairRecord>)>, CliError> {
    let mut out = Vec::new();
    for (name, p) in [("train", &cfg.data.train), ("dev", &cfg.data.dev), ("test", &cfg.data.test)] {
        if let Some(p) = p {
            out.push((name, load_split(cfg, p)?));
        }
    }
    if out.is_empty() {
        return Err(CliError::Config("no data split is set (data.train, data.dev, data.test)".into()));
    }
    Ok(out)
}

pub fn analyze(ctx: &Context, kind: AnalyzeKind) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let mut out = Outputs::new(ctx)?;
    match kind {
        AnalyzeKind::Overlap => {
            let units = cfg.overlap_units()?;
            let splits = splits(cfg)?;
            let mut w = out.create("overlap.tsv")?;
            writeln!(w, "split\tunit\tpairs_filter\tpairs\tshorter\tlonger\tunion\tintersection\tratio")?;
            for (split, records) in &splits {
                for &unit in &units {
                    for filter in [PairFilter::All, PairFilter::ParaphraseOnly] {
                        if !records.iter().any(|r| filter.keeps(r)) {
                            continue;
                        }
                        let s = overlap_stats(records, unit, filter)?;
                        writeln!(
                            w,
                            "{split}\t{unit}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                            filter.name(),
                            s.pairs,
                            s.mean_shorter,
                            s.mean_longer,
                            s.mean_union,
                            s.mean_intersection,
                            s.ratio
                        )?;
                    }
                }
            }
            w.flush()?;
        }
        AnalyzeKind::Oov => {
            let vectors = load_vectors(cfg)?
                .ok_or_else(|| CliError::Config("analyze oov needs data.pretrained".into()))?;
            let splits = splits(cfg)?;
            let mut w = out.create("oov.tsv")?;
            writeln!(w, "split\tinv\toov\toov_ratio")?;
            for (split, records) in &splits {
                let s = oov_stats(records, &vectors.vocab, cfg.data.lowercase);
                writeln!(w, "{split}\t{}\t{}\t{:.4}", s.inv, s.oov, s.ratio)?;
            }
            w.flush()?;
        }
        AnalyzeKind::Neighbors => {
            if cfg.analysis.queries.is_empty() {
                return Err(CliError::Config("analyze neighbors needs analysis.queries".into()));
            }
            let k = cfg.analysis.neighbors_k;
            let mut w = out.create("neighbors.tsv")?;
            writeln!(w, "query\trank\tneighbor\tcosine")?;
            let mut rows = |query: &str, found: Vec<(String, f64)>| -> std::io::Result<()> {
                for (rank, (word, cos)) in found.into_iter().enumerate() {
                    writeln!(w, "{query}\t{}\t{word}\t{cos:.6}", rank + 1)?;
                }
                Ok(())
            };
            if let Some(ckpt) = &cfg.analysis.checkpoint {
                let model = load_model(&cfg.resolve(ckpt))?;
                let mut words: BTreeSet<String> = BTreeSet::new();
                for (_, records) in splits(cfg)? {
                    words.extend(records.iter().flat_map(|r| r.tokens().map(str::to_string)));
                }
                let words: Vec<String> = words.into_iter().collect();
                let vocab = vocabulary_vectors(&model, &words)?;
                for q in &cfg.analysis.queries {
                    let v = model.embed_word(q)?;
                    rows(q, nearest_neighbors(&v, &vocab, k, Some(q)))?;
                }
            } else {
                let vectors = load_vectors(cfg)?.ok_or_else(|| {
                    CliError::Config("analyze neighbors needs analysis.checkpoint or data.pretrained".into())
                })?;
                let vocab: Vec<(String, Vec<f64>)> = vectors
                    .vocab
                    .words()
                    .filter_map(|word| vectors.vector(word).map(|v| (word.to_string(), v.to_vec())))
                    .collect();
                for q in &cfg.analysis.queries {
                    match vectors.vector(q) {
                        Some(v) => rows(q, nearest_neighbors(v, &vocab, k, Some(q)))?,
                        None => log::warn!("query `{q}` has no pretrained vector"),
                    }
                }
            }
            w.flush()?;
        }
        AnalyzeKind::Baseline => {
            let dataset = load_dataset(cfg)?;
            let test = dataset
                .test
                .as_ref()
                .or(dataset.dev.as_ref())
                .ok_or_else(|| CliError::Config("analyze baseline needs data.test or data.dev".into()))?;
            let (model, report) = ngram_lr_baseline(&dataset.train, test, &cfg.logreg_config())?;
            println!("baseline max F1 {:.4} at threshold {:.4}", report.max_f1, report.threshold);
            write_report(&mut out, "baseline", &report)?;
            out.json("baseline_model.json", &model)?;
        }
    }
    out.finish(match kind {
        AnalyzeKind::Overlap => "analyze overlap",
        AnalyzeKind::Oov => "analyze oov",
        AnalyzeKind::Neighbors => "analyze neighbors",
        AnalyzeKind::Baseline => "analyze baseline",
    })
}
