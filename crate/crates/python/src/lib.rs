use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use pwi_core::data::{self, OverlapUnit, PairFilter, SentencePairRecord};
use pwi_core::model::{load_checkpoint, save_checkpoint, PwiModel};
use pwi_core::train::{self, Dataset, TrainConfig};
use pwi_core::PwiError;

fn py_err(e: PwiError) -> PyErr {
    match e {
        PwiError::Io { .. } => PyIOError::new_err(e.to_string()),
        PwiError::NonFiniteLoss { .. } | PwiError::NonDeterministic { .. } | PwiError::MissingGradient(_) => {
            PyRuntimeError::new_err(e.to_string())
        }
        _ => PyValueError::new_err(e.to_string()),
    }
}

type Pair = (u8, String, String);

fn records(pairs: Vec<Pair>) -> PyResult<Vec<SentencePairRecord>> {
    pairs
        .into_iter()
        .enumerate()
        .map(|(i, (label, a, b))| SentencePairRecord::from_text(&a, &b, label, format!("py:{i}")).map_err(py_err))
        .collect()
}

fn words(s: &str) -> Vec<String> {
    data::tokenize(s)
}

/// A trained or loaded paraphrase model.
#[pyclass(name = "Model")]
struct PyModel {
    inner: PwiModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: load_checkpoint(path.as_ref()).map_err(py_err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_checkpoint(&self.inner, path.as_ref()).map_err(py_err)
    }

    /// `(P(not paraphrase), P(paraphrase))` for two raw sentences.
    fn predict(&self, s1: &str, s2: &str) -> PyResult<(f64, f64)> {
        let p = self.inner.predict(&words(s1), &words(s2)).map_err(py_err)?;
        Ok((p[0], p[1]))
    }

    fn score(&self, s1: &str, s2: &str) -> PyResult<f64> {
        self.inner.score(&words(s1), &words(s2)).map_err(py_err)
    }

    fn embed_word(&self, word: &str) -> PyResult<Vec<f64>> {
        self.inner.embed_word(word).map_err(py_err)
    }

    /// `(max_f1, threshold, accuracy)` on labeled pairs.
    fn evaluate(&self, pairs: Vec<Pair>) -> PyResult<(f64, f64, f64)> {
        let r = train::evaluate(&self.inner, &records(pairs)?).map_err(py_err)?;
        Ok((r.max_f1, r.threshold, r.accuracy))
    }

    #[getter]
    fn param_count(&self) -> usize {
        self.inner.param_count()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.config().label()
    }

    fn __repr__(&self) -> String {
        format!("Model({}, {} parameters)", self.inner.config().label(), self.inner.param_count())
    }
}

/// Default training settings as JSON, to edit and pass back to `train`.
#[pyfunction]
fn default_train_config() -> String {
    serde_json::to_string_pretty(&TrainConfig::default()).expect("config serializes")
}

/// Trains on `(label, sentence1, sentence2)` tuples. Returns the model and
/// the per-epoch metrics as JSON lines.
#[pyfunction]
#[pyo3(signature = (train_pairs, config_json=None, dev_pairs=None))]
fn train_model(
    py: Python<'_>,
    train_pairs: Vec<Pair>,
    config_json: Option<&str>,
    dev_pairs: Option<Vec<Pair>>,
) -> PyResult<(PyModel, Vec<String>)> {
    let config: TrainConfig = match config_json {
        Some(s) => serde_json::from_str(s).map_err(|e| PyValueError::new_err(format!("bad config: {e}")))?,
        None => TrainConfig::default(),
    };
    let dataset = Dataset {
        name: "python".into(),
        train: records(train_pairs)?,
        dev: dev_pairs.map(records).transpose()?,
        test: None,
    };
    let out = py
        .detach(|| train::train(&dataset, &config, None, |_| {}))
        .map_err(py_err)?;
    let lines = out
        .metrics
        .iter()
        .map(|m| serde_json::to_string(m).expect("metrics serialize"))
        .collect();
    Ok((PyModel { inner: out.best }, lines))
}

/// `(max F1, threshold)` over the precision-recall curve.
#[pyfunction]
fn max_f1(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<(f64, f64)> {
    train::max_f1(&scores, &labels).map_err(py_err)
}

#[pyfunction]
fn tokenize(text: &str) -> Vec<String> {
    data::tokenize(text)
}

#[pyfunction]
fn stem(word: &str) -> String {
    data::stem(word)
}

/// `(mean intersection, mean union, ratio)` of n-gram overlap.
#[pyfunction]
#[pyo3(signature = (pairs, unit="char-1", paraphrase_only=false))]
fn overlap(pairs: Vec<Pair>, unit: &str, paraphrase_only: bool) -> PyResult<(f64, f64, f64)> {
    let unit: OverlapUnit = unit.parse().map_err(py_err)?;
    let filter = if paraphrase_only { PairFilter::ParaphraseOnly } else { PairFilter::All };
    let s = data::overlap_stats(&records(pairs)?, unit, filter).map_err(py_err)?;
    Ok((s.mean_intersection, s.mean_union, s.ratio))
}

/// Synthetic paraphrase pairs with respelled words.
#[pyfunction]
fn synthetic_corpus(pairs: usize, seed: u64) -> Vec<Pair> {
    data::synthetic_corpus(pairs, seed)
        .records
        .into_iter()
        .map(|r| (r.label, r.sentence1.join(" "), r.sentence2.join(" ")))
        .collect()
}

#[pymodule]
fn pwi(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(default_train_config, m)?)?;
    m.add_function(wrap_pyfunction!(train_model, m)?)?;
    m.add_function(wrap_pyfunction!(max_f1, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(stem, m)?)?;
    m.add_function(wrap_pyfunction!(overlap, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_corpus, m)?)?;
    Ok(())
}
