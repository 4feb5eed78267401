use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PwiError, Result};

/// Where word vectors come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    WordPretrainedFixed,
    WordPretrainedUpdated,
    WordRandomFixed,
    WordRandomUpdated,
    SubwordC2w,
    SubwordCnn,
    /// Weighted average of an updated pretrained word vector and a subword
    /// composition.
    Combined,
}

impl InputMode {
    pub const ALL: [InputMode; 7] = [
        InputMode::WordPretrainedFixed,
        InputMode::WordPretrainedUpdated,
        InputMode::WordRandomFixed,
        InputMode::WordRandomUpdated,
        InputMode::SubwordC2w,
        InputMode::SubwordCnn,
        InputMode::Combined,
    ];

    pub fn uses_word_table(self) -> bool {
        !matches!(self, InputMode::SubwordC2w | InputMode::SubwordCnn)
    }

    pub fn uses_subwords(self) -> bool {
        matches!(self, InputMode::SubwordC2w | InputMode::SubwordCnn | InputMode::Combined)
    }

    pub fn pretrained(self) -> bool {
        matches!(
            self,
            InputMode::WordPretrainedFixed | InputMode::WordPretrainedUpdated | InputMode::Combined
        )
    }

    pub fn word_table_trainable(self) -> bool {
        !matches!(self, InputMode::WordPretrainedFixed | InputMode::WordRandomFixed)
    }

    pub fn name(self) -> &'static str {
        match self {
            InputMode::WordPretrainedFixed => "word-pretrained-fixed",
            InputMode::WordPretrainedUpdated => "word-pretrained-updated",
            InputMode::WordRandomFixed => "word-random-fixed",
            InputMode::WordRandomUpdated => "word-random-updated",
            InputMode::SubwordC2w => "subword-c2w",
            InputMode::SubwordCnn => "subword-cnn",
            InputMode::Combined => "combined",
        }
    }
}

impl fmt::Display for InputMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InputMode {
    type Err = PwiError;

    fn from_str(s: &str) -> Result<Self> {
        InputMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| PwiError::invalid(format!("unknown input mode `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Composition {
    C2w,
    Cnn,
}

impl fmt::Display for Composition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Composition::C2w => "c2w",
            Composition::Cnn => "cnn",
        })
    }
}

impl FromStr for Composition {
    type Err = PwiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "c2w" => Ok(Composition::C2w),
            "cnn" => Ok(Composition::Cnn),
            _ => Err(PwiError::invalid(format!("unknown composition `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Aggregation {
    /// `depth` 3×3 convolution blocks over a fixed 32×32 grid, then a linear
    /// layer. Depth 18 gives the 19 weighted layers of the original network.
    DeepCnn { depth: usize },
    /// Per-slice max and mean pooling into a two-layer perceptron.
    Mlp,
}

impl Aggregation {
    pub const FULL_DEPTH: usize = 18;

    pub fn name(&self) -> &'static str {
        match self {
            Aggregation::DeepCnn { .. } => "deep-cnn",
            Aggregation::Mlp => "mlp",
        }
    }

    pub fn parse(name: &str, depth: usize) -> Result<Self> {
        match name {
            "deep-cnn" => Ok(Aggregation::DeepCnn { depth }),
            "mlp" => Ok(Aggregation::Mlp),
            _ => Err(PwiError::invalid(format!("unknown aggregation `{name}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input: InputMode,
    /// Composition used by [`InputMode::Combined`]; the subword modes imply
    /// their own.
    pub composition: Composition,
    pub subword_n: usize,
    pub aggregation: Aggregation,
    /// Bi-LSTM hidden size of the sentence encoder.
    pub hidden: usize,
    pub word_dim: usize,
    pub subword_dim: usize,
    /// Hidden size of the C2W character Bi-LSTM.
    pub char_hidden: usize,
    pub cnn_channels: usize,
    pub mlp_hidden: usize,
    /// Weight of the auxiliary language-model losses; 0 disables the LM head.
    pub lm_gamma: f64,
    pub lm_hidden: usize,
    pub lm_proj: usize,
    pub lm_min_freq: usize,
    /// Divide each LM loss by its number of predictions.
    pub lm_normalize: bool,
    /// Word-vector weight for [`InputMode::Combined`].
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input: InputMode::SubwordCnn,
            composition: Composition::Cnn,
            subword_n: 3,
            aggregation: Aggregation::DeepCnn { depth: 4 },
            hidden: 64,
            word_dim: 200,
            subword_dim: 15,
            char_hidden: 50,
            cnn_channels: 16,
            mlp_hidden: 128,
            lm_gamma: 0.1,
            lm_hidden: 64,
            lm_proj: 64,
            lm_min_freq: 2,
            lm_normalize: true,
            alpha: crate::subword::DEFAULT_WORD_WEIGHT,
            seed: 1,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hidden", self.hidden),
            ("word_dim", self.word_dim),
            ("subword_dim", self.subword_dim),
            ("char_hidden", self.char_hidden),
            ("cnn_channels", self.cnn_channels),
            ("mlp_hidden", self.mlp_hidden),
            ("lm_hidden", self.lm_hidden),
            ("lm_proj", self.lm_proj),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(PwiError::invalid(format!("model.{name} must be positive")));
            }
        }
        if !(1..=3).contains(&self.subword_n) {
            return Err(PwiError::invalid(format!(
                "model.subword_n must be 1, 2 or 3, got {}",
                self.subword_n
            )));
        }
        if let Aggregation::DeepCnn { depth: 0 } = self.aggregation {
            return Err(PwiError::invalid("deep-cnn depth must be at least 1"));
        }
        if !(self.lm_gamma >= 0.0 && self.lm_gamma.is_finite()) {
            return Err(PwiError::invalid(format!("lm_gamma must be >= 0, got {}", self.lm_gamma)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(PwiError::invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    /// Composition actually used for subwords, if any.
    pub fn subword_composition(&self) -> Option<Composition> {
        match self.input {
            InputMode::SubwordC2w => Some(Composition::C2w),
            InputMode::SubwordCnn => Some(Composition::Cnn),
            InputMode::Combined => Some(self.composition),
            _ => None,
        }
    }

    pub fn uses_lm(&self) -> bool {
        self.lm_gamma > 0.0
    }

    /// Short label such as `LM, CNN, trigram` or `randomized, updated`.
    pub fn label(&self) -> String {
        let ngram = ["unigram", "bigram", "trigram"][self.subword_n - 1];
        let base = match self.input {
            InputMode::WordPretrainedFixed => "pretrained, fixed".to_string(),
            InputMode::WordPretrainedUpdated => "pretrained, updated".to_string(),
            InputMode::WordRandomFixed => "randomized, fixed".to_string(),
            InputMode::WordRandomUpdated => "randomized, updated".to_string(),
            InputMode::SubwordC2w => format!("C2W, {ngram}"),
            InputMode::SubwordCnn => format!("CNN, {ngram}"),
            InputMode::Combined => format!("combined {}, {ngram}", self.composition.to_string().to_uppercase()),
        };
        let mut label = if self.uses_lm() { format!("LM, {base}") } else { base };
        if self.aggregation == Aggregation::Mlp {
            label.push_str(" (mlp)");
        }
        label
    }
}
