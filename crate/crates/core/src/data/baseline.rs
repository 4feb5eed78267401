use serde::{Deserialize, Serialize};

use super::overlap::{char_ngrams, multiset_overlap, word_ngrams, NgramBag};
use super::{stem, SentencePairRecord};
use crate::error::{PwiError, Result};
use crate::train::{report_from_scores, EvalReport};

pub const NUM_FEATURES: usize = 10;

/// Overlap ratios `|A∩B| / |A∪B|` for word 1–3-grams, stemmed word 1–3-grams
/// and character 1–4-grams, in that order. A unit absent from both sentences
/// gives 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NgramFeatureVector(pub [f64; NUM_FEATURES]);

fn ratio(a: &NgramBag, b: &NgramBag) -> f64 {
    let (i, u) = multiset_overlap(a, b);
    if u == 0 {
        0.0
    } else {
        i as f64 / u as f64
    }
}

impl NgramFeatureVector {
    pub fn from_pair(r: &SentencePairRecord) -> Self {
        let (a, b) = (&r.sentence1, &r.sentence2);
        let sa: Vec<String> = a.iter().map(|w| stem(w)).collect();
        let sb: Vec<String> = b.iter().map(|w| stem(w)).collect();
        let mut f = [0.0; NUM_FEATURES];
        for n in 1..=3 {
            f[n - 1] = ratio(&word_ngrams(a, n), &word_ngrams(b, n));
            f[n + 2] = ratio(&word_ngrams(&sa, n), &word_ngrams(&sb, n));
        }
        for n in 1..=4 {
            f[n + 5] = ratio(&char_ngrams(a, n), &char_ngrams(b, n));
        }
        NgramFeatureVector(f)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub l2: f64,
    pub lr: f64,
    pub iterations: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            l2: 1e-4,
            lr: 1.0,
            iterations: 3000,
        }
    }
}

/// L2-regularized logistic regression; the bias is not regularized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub weights: Vec<f64>,
    pub bias: f64,
}

fn sigmoid(z: f64) -> f64 {
    crate::autodiff::sigmoid_scalar(z)
}

impl LogisticRegression {
    pub fn zeros(dim: usize) -> Self {
        LogisticRegression {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn prob(&self, x: &[f64]) -> f64 {
        let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
        sigmoid(z)
    }

    /// Mean cross-entropy plus `l2/2 · |w|²`, and its gradient
    /// (weights first, bias last).
    pub fn loss_and_grad(&self, xs: &[Vec<f64>], ys: &[u8], l2: f64) -> (f64, Vec<f64>) {
        let n = xs.len() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.weights.len() + 1];
        for (x, &y) in xs.iter().zip(ys) {
            let z: f64 = self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias;
            // log(1 + e^z) - y z, computed stably
            loss += z.max(0.0) + (-z.abs()).exp().ln_1p() - f64::from(y) * z;
            let r = sigmoid(z) - f64::from(y);
            for (g, v) in grad.iter_mut().zip(x) {
                *g += r * v;
            }
            *grad.last_mut().expect("bias slot") += r;
        }
        loss /= n;
        grad.iter_mut().for_each(|g| *g /= n);
        for (g, w) in grad.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        (loss, grad)
    }

    /// Full-batch gradient descent from zero weights.
    pub fn fit(xs: &[Vec<f64>], ys: &[u8], config: &LogRegConfig) -> Result<Self> {
        if xs.is_empty() || xs.len() != ys.len() {
            return Err(PwiError::invalid("logistic regression needs equally many features and labels"));
        }
        let positives = ys.iter().filter(|&&y| y == 1).count();
        if positives == 0 || positives == ys.len() {
            return Err(PwiError::invalid("training set has a single class"));
        }
        let mut m = LogisticRegression::zeros(xs[0].len());
        for _ in 0..config.iterations {
            let (_, g) = m.loss_and_grad(xs, ys, config.l2);
            for (w, gi) in m.weights.iter_mut().zip(&g) {
                *w -= config.lr * gi;
            }
            m.bias -= config.lr * g[g.len() - 1];
        }
        Ok(m)
    }
}

/// Trains on n-gram overlap features of `train` and evaluates on `test`.
pub fn ngram_lr_baseline(
    train: &[SentencePairRecord],
    test: &[SentencePairRecord],
    config: &LogRegConfig,
) -> Result<(LogisticRegression, EvalReport)> {
    if train.is_empty() || test.is_empty() {
        return Err(PwiError::invalid("baseline needs non-empty train and test sets"));
    }
    let feats = |rs: &[SentencePairRecord]| -> Vec<Vec<f64>> {
        rs.iter().map(|r| NgramFeatureVector::from_pair(r).0.to_vec()).collect()
    };
    let ys: Vec<u8> = train.iter().map(|r| r.label).collect();
    let model = LogisticRegression::fit(&feats(train), &ys, config)?;
    let scores: Vec<f64> = feats(test).iter().map(|x| model.prob(x)).collect();
    let labels: Vec<u8> = test.iter().map(|r| r.label).collect();
    let report = report_from_scores(&scores, &labels, NUM_FEATURES + 1)?;
    Ok((model, report))
}
