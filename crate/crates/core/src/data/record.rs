use serde::{Deserialize, Serialize};

use crate::error::{PwiError, Result};

/// Two tokenized sentences and a binary paraphrase label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePairRecord {
    pub sentence1: Vec<String>,
    pub sentence2: Vec<String>,
    pub label: u8,
    /// Where the record came from, e.g. `train.tsv:12`.
    pub source: String,
}

impl SentencePairRecord {
    pub fn new(sentence1: Vec<String>, sentence2: Vec<String>, label: u8, source: impl Into<String>) -> Result<Self> {
        if sentence1.is_empty() || sentence2.is_empty() {
            return Err(PwiError::Data("empty sentence".into()));
        }
        if label > 1 {
            return Err(PwiError::Data(format!("label must be 0 or 1, got {label}")));
        }
        Ok(SentencePairRecord {
            sentence1,
            sentence2,
            label,
            source: source.into(),
        })
    }

    pub fn from_text(s1: &str, s2: &str, label: u8, source: impl Into<String>) -> Result<Self> {
        Self::new(tokenize(s1), tokenize(s2), label, source)
    }

    pub fn is_paraphrase(&self) -> bool {
        self.label == 1
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentence1.iter().chain(&self.sentence2).map(String::as_str)
    }
}

const TERMINAL: &[char] = &['.', ',', '!', '?', ';', ':'];

/// Whitespace tokenization that splits a run of terminal punctuation off the
/// end of each token. `#tags` and `@mentions` stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split_whitespace() {
        let body = raw.trim_end_matches(TERMINAL);
        if body.is_empty() || body.len() == raw.len() {
            out.push(raw.to_string());
        } else {
            out.push(body.to_string());
            out.push(raw[body.len()..].to_string());
        }
    }
    out
}

pub fn lowercase_tokens(tokens: &[String]) -> Vec<String> {
    tokens.iter().map(|t| t.to_lowercase()).collect()
}
