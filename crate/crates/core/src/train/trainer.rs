use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{accuracy, evaluate};
use crate::autodiff::{Graph, Optimizer, OptimizerConfig};
use crate::data::SentencePairRecord;
use crate::error::{PwiError, Result};
use crate::model::{ModelConfig, PwiModel};
use crate::subword::Pretrained;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub optimizer: OptimizerConfig,
    pub batch_size: usize,
    /// Seeds model initialization, the dev holdout and every epoch's shuffle.
    pub seed: u64,
    /// Share of training pairs held out when the dataset has no dev split.
    pub dev_fraction: f64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            optimizer: OptimizerConfig::default(),
            batch_size: 1,
            seed: 1,
            dev_fraction: 0.1,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(PwiError::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(PwiError::invalid("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.dev_fraction) {
            return Err(PwiError::invalid(format!(
                "dev_fraction must lie in [0, 1), got {}",
                self.dev_fraction
            )));
        }
        if !(self.optimizer.lr() > 0.0) {
            return Err(PwiError::invalid("learning rate must be positive"));
        }
        self.model.validate()
    }

    /// The model config with this run's seed.
    pub fn seeded_model(&self) -> ModelConfig {
        ModelConfig {
            seed: self.seed,
            ..self.model.clone()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    pub train: Vec<SentencePairRecord>,
    pub dev: Option<Vec<SentencePairRecord>>,
    pub test: Option<Vec<SentencePairRecord>>,
}

/// One line of the metrics log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean joint loss over the epoch's steps.
    pub train_loss: f64,
    pub train_cls_loss: f64,
    /// Mean `E_fwd + E_bwd` (before γ), when the LM head is on.
    pub train_lm_loss: Option<f64>,
    /// Accuracy of the predictions made during the epoch, before each update.
    pub train_accuracy: f64,
    pub dev_max_f1: Option<f64>,
    pub dev_threshold: Option<f64>,
    pub dev_accuracy: Option<f64>,
}

pub fn write_metrics_jsonl<W: Write>(mut w: W, metrics: &[EpochMetrics]) -> std::io::Result<()> {
    for m in metrics {
        serde_json::to_writer(&mut w, m)?;
        writeln!(w)?;
    }
    Ok(())
}

/// Splits off a seeded `fraction` of `records` (at least one pair when there
/// are two or more) as a dev set. Returns `(train, dev)`.
pub fn holdout(records: &[SentencePairRecord], fraction: f64, seed: u64) -> (Vec<SentencePairRecord>, Vec<SentencePairRecord>) {
    let n = records.len();
    let mut k = (n as f64 * fraction).round() as usize;
    if fraction > 0.0 && n >= 2 {
        k = k.clamp(1, n - 1);
    }
    if k == 0 {
        return (records.to_vec(), Vec::new());
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_DE75));
    let mut dev_idx = idx[..k].to_vec();
    dev_idx.sort_unstable();
    let mut is_dev = vec![false; n];
    for &i in &dev_idx {
        is_dev[i] = true;
    }
    let train = records.iter().zip(&is_dev).filter(|(_, &d)| !d).map(|(r, _)| r.clone()).collect();
    let dev = dev_idx.iter().map(|&i| records[i].clone()).collect();
    (train, dev)
}

/// Drives training one epoch at a time.
pub struct Trainer {
    pub model: PwiModel,
    pub train: Vec<SentencePairRecord>,
    pub dev: Vec<SentencePairRecord>,
    config: TrainConfig,
    optimizer: Optimizer,
    rng: ChaCha8Rng,
    epoch: usize,
    last_finite: Option<f64>,
}

impl Trainer {
    /// Splits the dataset, builds the model from the training split and
    /// prepares the optimizer.
    pub fn new(dataset: &Dataset, config: TrainConfig, pretrained: Option<&Pretrained>) -> Result<Self> {
        config.validate()?;
        if dataset.train.is_empty() {
            return Err(PwiError::Data(format!("dataset `{}` has no training pairs", dataset.name)));
        }
        let (train, dev) = match &dataset.dev {
            Some(dev) => (dataset.train.clone(), dev.clone()),
            None => holdout(&dataset.train, config.dev_fraction, config.seed),
        };
        let mc = config.seeded_model();
        // evaluation words with a pretrained vector keep it instead of falling back to UNK
        let extra: Vec<&str> = match pretrained {
            Some(p) if mc.input.pretrained() => dev
                .iter()
                .chain(dataset.test.iter().flatten())
                .flat_map(|r| r.tokens())
                .filter(|t| p.vector(t).is_some())
                .collect(),
            _ => Vec::new(),
        };
        let model = PwiModel::build(mc, train.iter().flat_map(|r| r.tokens()), extra, pretrained)?;
        Ok(Self::from_model(model, train, dev, config))
    }

    pub fn from_model(model: PwiModel, train: Vec<SentencePairRecord>, dev: Vec<SentencePairRecord>, config: TrainConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
        Trainer {
            model,
            train,
            dev,
            optimizer: Optimizer::new(config.optimizer.clone()),
            config,
            rng,
            epoch: 0,
            last_finite: None,
        }
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// One pass over the shuffled training split.
    pub fn run_epoch(&mut self) -> Result<EpochMetrics> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut total, mut cls, mut lm, mut correct) = (0.0, 0.0, 0.0, 0usize);
        let uses_lm = self.model.net.lm.is_some();
        let mut step = 0;
        for batch in order.chunks(self.config.batch_size) {
            step += 1;
            let PwiModel { net, store } = &mut self.model;
            store.fill_zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let r = &self.train[i];
                let label = usize::from(r.label);
                let (parts, grads) = {
                    let mut g = Graph::with_params(store);
                    let lp = net.loss(&mut g, &r.sentence1, &r.sentence2, label)?;
                    let loss = g.scalar(lp.total);
                    if !loss.is_finite() {
                        return Err(PwiError::NonFiniteLoss {
                            loss,
                            epoch: self.epoch,
                            step,
                            pair: r.source.clone(),
                            last_finite: self.last_finite,
                        });
                    }
                    self.last_finite = Some(loss);
                    let logits = g.value(lp.logits);
                    let predicted = usize::from(logits[1] >= logits[0]);
                    let lm_sum = match (lp.lm_fwd, lp.lm_bwd) {
                        (Some(f), Some(b)) => g.scalar(f) + g.scalar(b),
                        _ => 0.0,
                    };
                    let parts = (loss, g.scalar(lp.cls), lm_sum, predicted == label);
                    (parts, g.backward(lp.total)?)
                };
                total += parts.0;
                cls += parts.1;
                lm += parts.2;
                correct += usize::from(parts.3);
                store.accumulate(&grads, scale);
            }
            self.optimizer.step(store)?;
        }
        let n = self.train.len() as f64;
        let (dev_max_f1, dev_threshold, dev_accuracy) = self.dev_metrics()?;
        let m = EpochMetrics {
            epoch: self.epoch,
            train_loss: total / n,
            train_cls_loss: cls / n,
            train_lm_loss: uses_lm.then_some(lm / n),
            train_accuracy: correct as f64 / n,
            dev_max_f1,
            dev_threshold,
            dev_accuracy,
        };
        log::info!(
            "epoch {}: loss {:.4} train acc {:.3} dev F1 {}",
            m.epoch,
            m.train_loss,
            m.train_accuracy,
            m.dev_max_f1.map_or("n/a".to_string(), |f| format!("{f:.4}"))
        );
        Ok(m)
    }

    fn dev_metrics(&self) -> Result<(Option<f64>, Option<f64>, Option<f64>)> {
        if self.dev.is_empty() {
            return Ok((None, None, None));
        }
        if self.dev.iter().any(|r| r.is_paraphrase()) {
            let rep = evaluate(&self.model, &self.dev)?;
            Ok((Some(rep.max_f1), Some(rep.threshold), Some(rep.accuracy)))
        } else {
            Ok((None, None, Some(accuracy(&self.model, &self.dev)?)))
        }
    }
}

pub struct TrainOutcome {
    /// Model after the last epoch.
    pub last: PwiModel,
    /// Model after the epoch with the best dev score (max F1, else accuracy);
    /// the last epoch when there is no dev data.
    pub best: PwiModel,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
    pub train: Vec<SentencePairRecord>,
    pub dev: Vec<SentencePairRecord>,
}

fn dev_score(m: &EpochMetrics) -> Option<f64> {
    m.dev_max_f1.or(m.dev_accuracy)
}

/// Runs `config.epochs` epochs, calling `on_epoch` after each.
pub fn train(
    dataset: &Dataset,
    config: &TrainConfig,
    pretrained: Option<&Pretrained>,
    mut on_epoch: impl FnMut(&EpochMetrics),
) -> Result<TrainOutcome> {
    let mut t = Trainer::new(dataset, config.clone(), pretrained)?;
    let mut metrics = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, PwiModel)> = None;
    for _ in 0..config.epochs {
        let m = t.run_epoch()?;
        on_epoch(&m);
        if let Some(s) = dev_score(&m) {
            if best.as_ref().is_none_or(|(b, _, _)| s > *b) {
                best = Some((s, m.epoch, t.model.clone()));
            }
        }
        metrics.push(m);
    }
    let (best_epoch, best) = match best {
        Some((_, e, model)) => (e, model),
        None => (config.epochs, t.model.clone()),
    };
    Ok(TrainOutcome {
        last: t.model,
        best,
        best_epoch,
        metrics,
        train: t.train,
        dev: t.dev,
    })
}
