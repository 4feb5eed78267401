use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    aggregate, apply_focus, encode, interact, similarity_focus, AggregatorParams, BiLstmParams, Composition,
    FocusMask, InputMode, ModelConfig,
};
use crate::autodiff::{Graph, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};
use crate::lm::{joint_loss_var, lm_losses, LmHead};
use crate::subword::{
    combine_weighted, compose_c2w, compose_charcnn, default_filter_bank, C2wParams, CharCnnParams, EmbeddingTable,
    Pretrained, SubwordScheme, SubwordVocab, Vocab,
};

/// Class index of "paraphrase".
pub const POSITIVE: usize = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordInput {
    pub vocab: Vocab,
    pub table: EmbeddingTable,
    /// Vocabulary words whose row was copied from the pretrained file.
    pub pretrained_rows: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composer {
    C2w(C2wParams),
    Cnn(CharCnnParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubwordInput {
    pub vocab: SubwordVocab,
    pub table: EmbeddingTable,
    pub composer: Composer,
}

/// Everything about a model except its parameter values: the config,
/// vocabularies and which parameters play which role.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub config: ModelConfig,
    pub words: Option<WordInput>,
    pub subwords: Option<SubwordInput>,
    pub encoder: BiLstmParams,
    pub aggregator: AggregatorParams,
    pub lm: Option<LmHead>,
}

/// Graph nodes of one pair's forward pass.
#[derive(Clone, Debug)]
pub struct PairForward {
    pub logits: Var,
    pub inputs: [Vec<Var>; 2],
    pub mask: FocusMask,
}

#[derive(Clone, Copy, Debug)]
pub struct LossParts {
    pub logits: Var,
    pub total: Var,
    pub cls: Var,
    pub lm_fwd: Option<Var>,
    pub lm_bwd: Option<Var>,
}

/// Per-graph cache so each word type is composed once.
pub type WordCache = HashMap<String, Var>;

impl Network {
    pub fn word_vector(&self, g: &mut Graph<'_>, word: &str, cache: &mut WordCache) -> Result<Var> {
        if word.is_empty() {
            return Err(PwiError::invalid("cannot embed an empty word"));
        }
        if let Some(&v) = cache.get(word) {
            return Ok(v);
        }
        let word_vec = match &self.words {
            Some(w) => {
                let rows = w.table.lookup(g, &[w.vocab.id(word)])?;
                Some(g.reshape(rows, &[w.table.dim])?)
            }
            None => None,
        };
        let sub_vec = match &self.subwords {
            Some(s) => {
                let ids = s.vocab.ids(word)?;
                Some(match &s.composer {
                    Composer::C2w(p) => compose_c2w(g, &s.table, &ids, p)?,
                    Composer::Cnn(p) => compose_charcnn(g, &s.table, &ids, p)?,
                })
            }
            None => None,
        };
        let v = match (word_vec, sub_vec) {
            (Some(w), Some(s)) => combine_weighted(g, w, s, self.config.alpha)?,
            (Some(w), None) => w,
            (None, Some(s)) => s,
            (None, None) => unreachable!("every input mode has a word or subword path"),
        };
        cache.insert(word.to_string(), v);
        Ok(v)
    }

    pub fn sentence_vectors<S: AsRef<str>>(&self, g: &mut Graph<'_>, tokens: &[S], cache: &mut WordCache) -> Result<Vec<Var>> {
        tokens.iter().map(|t| self.word_vector(g, t.as_ref(), cache)).collect()
    }

    pub fn forward<S: AsRef<str>>(&self, g: &mut Graph<'_>, s1: &[S], s2: &[S], cache: &mut WordCache) -> Result<PairForward> {
        if s1.is_empty() || s2.is_empty() {
            return Err(PwiError::invalid("both sentences need at least one token"));
        }
        let x1 = self.sentence_vectors(g, s1, cache)?;
        let x2 = self.sentence_vectors(g, s2, cache)?;
        let a = encode(g, &x1, &self.encoder)?;
        let b = encode(g, &x2, &self.encoder)?;
        let d = interact(g, &a, &b)?;
        let mask = similarity_focus(g, &d)?;
        let masked = apply_focus(g, &d, &mask)?;
        let logits = aggregate(g, masked, &self.aggregator)?;
        Ok(PairForward {
            logits,
            inputs: [x1, x2],
            mask,
        })
    }

    /// Classification cross-entropy plus, when the LM head is present, the
    /// γ-weighted LM losses of both sentences.
    pub fn loss<S: AsRef<str>>(&self, g: &mut Graph<'_>, s1: &[S], s2: &[S], label: usize) -> Result<LossParts> {
        let mut cache = WordCache::new();
        let out = self.forward(g, s1, s2, &mut cache)?;
        let cls = g.cross_entropy(out.logits, label)?;
        let Some(head) = &self.lm else {
            return Ok(LossParts {
                logits: out.logits,
                total: cls,
                cls,
                lm_fwd: None,
                lm_bwd: None,
            });
        };
        let (f1, b1) = lm_losses(g, s1, &out.inputs[0], head)?;
        let (f2, b2) = lm_losses(g, s2, &out.inputs[1], head)?;
        let f = g.add(f1, f2)?;
        let b = g.add(b1, b2)?;
        let total = joint_loss_var(g, cls, f, b, self.config.lm_gamma)?;
        Ok(LossParts {
            logits: out.logits,
            total,
            cls,
            lm_fwd: Some(f),
            lm_bwd: Some(b),
        })
    }
}

/// A network together with its parameter values.
#[derive(Clone, Debug)]
pub struct PwiModel {
    pub net: Network,
    pub store: ParamStore,
}

impl PwiModel {
    /// Builds a freshly initialized model. `train_tokens` (with repeats)
    /// determine the word, subword and LM vocabularies; `extra_words` are
    /// added to the word vocabulary only. Pretrained vectors are required by
    /// the pretrained and combined input modes and must match `word_dim`.
    pub fn build<'a>(
        config: ModelConfig,
        train_tokens: impl IntoIterator<Item = &'a str>,
        extra_words: impl IntoIterator<Item = &'a str>,
        pretrained: Option<&Pretrained>,
    ) -> Result<Self> {
        config.validate()?;
        let train_tokens: Vec<&str> = train_tokens.into_iter().collect();
        if train_tokens.is_empty() {
            return Err(PwiError::invalid("cannot build a model without training tokens"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let mode = config.input;
        let d = config.word_dim;

        let vocab = Vocab::from_counts(train_tokens.iter().copied().chain(extra_words), 1);
        let words = if mode.uses_word_table() {
            let trainable = mode.word_table_trainable();
            let (matrix, pretrained_rows) = if mode.pretrained() {
                let p = pretrained
                    .ok_or_else(|| PwiError::invalid(format!("input mode `{mode}` needs pretrained vectors")))?;
                if p.dim() != d {
                    return Err(PwiError::invalid(format!(
                        "pretrained vectors have {} dimensions but word_dim is {d}",
                        p.dim()
                    )));
                }
                p.table_for(&vocab, &mut rng)
            } else {
                (Tensor::uniform(&[vocab.len(), d], crate::subword::INIT_RANGE, &mut rng), 0)
            };
            let table = EmbeddingTable::from_tensor(&mut store, "words", matrix, trainable)?;
            Some(WordInput {
                vocab: vocab.clone(),
                table,
                pretrained_rows,
            })
        } else {
            None
        };

        let subwords = match config.subword_composition() {
            Some(comp) => {
                let sv = SubwordVocab::build(vocab.words(), SubwordScheme::from_n(config.subword_n)?)?;
                let table = EmbeddingTable::random(&mut store, "subwords", sv.len(), config.subword_dim, true, &mut rng)?;
                let range = 1.0 / (config.subword_dim as f64).sqrt();
                let composer = match comp {
                    Composition::C2w => Composer::C2w(C2wParams::register(
                        &mut store,
                        "c2w",
                        config.subword_dim,
                        config.char_hidden,
                        d,
                        range,
                        &mut rng,
                    )?),
                    Composition::Cnn => Composer::Cnn(CharCnnParams::register(
                        &mut store,
                        "charcnn",
                        config.subword_dim,
                        &default_filter_bank(d),
                        range,
                        &mut rng,
                    )?),
                };
                Some(SubwordInput {
                    vocab: sv,
                    table,
                    composer,
                })
            }
            None => None,
        };

        let encoder = BiLstmParams::register(&mut store, "encoder", d, config.hidden, &mut rng)?;
        let aggregator = AggregatorParams::register(
            &mut store,
            "aggregate",
            config.aggregation,
            config.cnn_channels,
            config.mlp_hidden,
            &mut rng,
        )?;
        let lm = if config.uses_lm() {
            let lm_vocab = Vocab::from_counts(train_tokens.iter().copied(), config.lm_min_freq);
            Some(LmHead::register(
                &mut store,
                "lm",
                lm_vocab,
                d,
                config.lm_hidden,
                config.lm_proj,
                config.lm_normalize,
                &mut rng,
            )?)
        } else {
            None
        };
        log::debug!(
            "built {} model: {} parameters ({} trainable)",
            config.label(),
            store.iter().map(|(_, p)| p.value.numel()).sum::<usize>(),
            store.trainable_count()
        );
        Ok(PwiModel {
            net: Network {
                config,
                words,
                subwords,
                encoder,
                aggregator,
                lm,
            },
            store,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.net.config
    }

    /// Number of trainable scalars.
    pub fn param_count(&self) -> usize {
        self.store.trainable_count()
    }

    /// `[P(not paraphrase), P(paraphrase)]`.
    pub fn predict<S: AsRef<str>>(&self, s1: &[S], s2: &[S]) -> Result<[f64; 2]> {
        let mut g = Graph::with_params(&self.store);
        let out = self.net.forward(&mut g, s1, s2, &mut WordCache::new())?;
        let p = g.softmax(out.logits);
        let v = g.value(p);
        Ok([v[0], v[1]])
    }

    /// Paraphrase-class probability, the score used for PR curves.
    pub fn score<S: AsRef<str>>(&self, s1: &[S], s2: &[S]) -> Result<f64> {
        Ok(self.predict(s1, s2)?[POSITIVE])
    }

    /// The vector the model feeds its encoder for `word`.
    pub fn embed_word(&self, word: &str) -> Result<Vec<f64>> {
        let mut g = Graph::with_params(&self.store);
        let v = self.net.word_vector(&mut g, word, &mut WordCache::new())?;
        Ok(g.value(v).to_vec())
    }

    /// Whether the word table is a plain lookup that [`InputMode`] keeps fixed.
    pub fn word_table_frozen(&self) -> bool {
        matches!(self.net.config.input, InputMode::WordPretrainedFixed | InputMode::WordRandomFixed)
    }
}
