use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::SentencePairRecord;
use crate::error::{PwiError, Result};
use crate::model::PwiModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// One point per distinct score, thresholds descending. A pair is predicted
/// positive iff its score is at least the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
}

fn check(scores: &[f64], labels: &[u8]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(PwiError::invalid(format!(
            "{} scores but {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(PwiError::invalid(format!("non-finite score {s}")));
    }
    if labels.iter().any(|&l| l > 1) {
        return Err(PwiError::invalid("labels must be 0 or 1"));
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 {
        return Err(PwiError::invalid("F1 is undefined without positive labels"));
    }
    Ok(positives)
}

impl PrCurve {
    pub fn new(scores: &[f64], labels: &[u8]) -> Result<Self> {
        let positives = check(scores, labels)?;
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
        let mut points = Vec::new();
        let (mut tp, mut fp) = (0usize, 0usize);
        let mut k = 0;
        while k < order.len() {
            let t = scores[order[k]];
            while k < order.len() && scores[order[k]] == t {
                if labels[order[k]] == 1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                k += 1;
            }
            let fn_ = positives - tp;
            points.push(PrPoint {
                threshold: t,
                precision: tp as f64 / (tp + fp) as f64,
                recall: tp as f64 / positives as f64,
                f1: 2.0 * tp as f64 / (2 * tp + fp + fn_) as f64,
            });
        }
        Ok(PrCurve { points })
    }

    /// Highest F1 and its threshold; among equal F1 values the higher
    /// threshold wins.
    pub fn best(&self) -> PrPoint {
        let mut best = self.points[0];
        for p in &self.points[1..] {
            if p.f1 > best.f1 {
                best = *p;
            }
        }
        best
    }

    /// `threshold precision recall f1` TSV with a header line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "threshold\tprecision\trecall\tf1")?;
        for p in &self.points {
            writeln!(w, "{}\t{}\t{}\t{}", p.threshold, p.precision, p.recall, p.f1)?;
        }
        Ok(())
    }
}

/// `(max F1, threshold)` over all distinct-score thresholds.
pub fn max_f1(scores: &[f64], labels: &[u8]) -> Result<(f64, f64)> {
    let best = PrCurve::new(scores, labels)?.best();
    Ok((best.f1, best.threshold))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub max_f1: f64,
    pub threshold: f64,
    /// Accuracy when predicting positive iff score ≥ 0.5.
    pub accuracy: f64,
    pub curve: PrCurve,
    pub param_count: usize,
}

pub fn report_from_scores(scores: &[f64], labels: &[u8], param_count: usize) -> Result<EvalReport> {
    let curve = PrCurve::new(scores, labels)?;
    let best = curve.best();
    let correct = scores
        .iter()
        .zip(labels)
        .filter(|(&s, &l)| u8::from(s >= 0.5) == l)
        .count();
    Ok(EvalReport {
        max_f1: best.f1,
        threshold: best.threshold,
        accuracy: correct as f64 / scores.len() as f64,
        curve,
        param_count,
    })
}

/// Paraphrase probabilities of `model` on `records`.
pub fn score_records(model: &PwiModel, records: &[SentencePairRecord]) -> Result<Vec<f64>> {
    records.iter().map(|r| model.score(&r.sentence1, &r.sentence2)).collect()
}

pub fn evaluate(model: &PwiModel, records: &[SentencePairRecord]) -> Result<EvalReport> {
    let scores = score_records(model, records)?;
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();
    report_from_scores(&scores, &labels, model.param_count())
}

/// Share of `records` the model labels correctly at threshold 0.5.
pub fn accuracy(model: &PwiModel, records: &[SentencePairRecord]) -> Result<f64> {
    let scores = score_records(model, records)?;
    let correct = scores
        .iter()
        .zip(records)
        .filter(|(&s, r)| u8::from(s >= 0.5) == r.label)
        .count();
    Ok(correct as f64 / records.len().max(1) as f64)
}
