use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SentencePairRecord;
use crate::error::{PwiError, Result};

/// Multiset of n-grams.
pub type NgramBag = HashMap<String, usize>;

/// Word n-grams of `tokens`.
pub fn word_ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> NgramBag {
    let mut bag = NgramBag::new();
    if n == 0 || tokens.len() < n {
        return bag;
    }
    for w in tokens.windows(n) {
        let key = w.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
        *bag.entry(key).or_default() += 1;
    }
    bag
}

/// Character n-grams of the sentence written out with single spaces between
/// tokens; the spaces count as characters.
pub fn char_ngrams<S: AsRef<str>>(tokens: &[S], n: usize) -> NgramBag {
    let text = tokens.iter().map(AsRef::as_ref).collect::<Vec<_>>().join(" ");
    let chars: Vec<char> = text.chars().collect();
    let mut bag = NgramBag::new();
    if n == 0 || chars.len() < n {
        return bag;
    }
    for w in chars.windows(n) {
        *bag.entry(w.iter().collect()).or_default() += 1;
    }
    bag
}

pub fn bag_size(b: &NgramBag) -> usize {
    b.values().sum()
}

/// `(|A ∩ B|, |A ∪ B|)` as multisets.
pub fn multiset_overlap(a: &NgramBag, b: &NgramBag) -> (usize, usize) {
    let mut inter = 0;
    let mut union = 0;
    for (k, &ca) in a {
        let cb = b.get(k).copied().unwrap_or(0);
        inter += ca.min(cb);
        union += ca.max(cb);
    }
    for (k, &cb) in b {
        if !a.contains_key(k) {
            union += cb;
        }
    }
    (inter, union)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OverlapUnit {
    Char1,
    Char2,
    Word1,
    Word2,
}

impl OverlapUnit {
    pub const ALL: [OverlapUnit; 4] = [OverlapUnit::Char1, OverlapUnit::Char2, OverlapUnit::Word1, OverlapUnit::Word2];

    pub fn name(self) -> &'static str {
        match self {
            OverlapUnit::Char1 => "char-1",
            OverlapUnit::Char2 => "char-2",
            OverlapUnit::Word1 => "word-1",
            OverlapUnit::Word2 => "word-2",
        }
    }

    pub fn bag<S: AsRef<str>>(self, tokens: &[S]) -> NgramBag {
        match self {
            OverlapUnit::Char1 => char_ngrams(tokens, 1),
            OverlapUnit::Char2 => char_ngrams(tokens, 2),
            OverlapUnit::Word1 => word_ngrams(tokens, 1),
            OverlapUnit::Word2 => word_ngrams(tokens, 2),
        }
    }
}

impl fmt::Display for OverlapUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OverlapUnit {
    type Err = PwiError;

    fn from_str(s: &str) -> Result<Self> {
        OverlapUnit::ALL
            .into_iter()
            .find(|u| u.name() == s)
            .ok_or_else(|| PwiError::invalid(format!("unknown overlap unit `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairFilter {
    All,
    ParaphraseOnly,
}

impl PairFilter {
    pub fn name(self) -> &'static str {
        match self {
            PairFilter::All => "all",
            PairFilter::ParaphraseOnly => "paraphrase",
        }
    }

    pub fn keeps(self, r: &SentencePairRecord) -> bool {
        match self {
            PairFilter::All => true,
            PairFilter::ParaphraseOnly => r.is_paraphrase(),
        }
    }
}

impl FromStr for PairFilter {
    type Err = PwiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(PairFilter::All),
            "paraphrase" => Ok(PairFilter::ParaphraseOnly),
            _ => Err(PwiError::invalid(format!("unknown pair filter `{s}`"))),
        }
    }
}

/// Per-pair averages. "Shorter" and "longer" are the sentences with fewer and
/// more units of the chosen kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub unit: OverlapUnit,
    pub filter: PairFilter,
    pub pairs: usize,
    pub mean_shorter: f64,
    pub mean_longer: f64,
    pub mean_union: f64,
    pub mean_intersection: f64,
    /// `mean_intersection / mean_union`.
    pub ratio: f64,
}

pub fn overlap_stats(records: &[SentencePairRecord], unit: OverlapUnit, filter: PairFilter) -> Result<OverlapStats> {
    let (mut short, mut long, mut uni, mut inter, mut pairs) = (0usize, 0usize, 0usize, 0usize, 0usize);
    for r in records.iter().filter(|r| filter.keeps(r)) {
        let a = unit.bag(&r.sentence1);
        let b = unit.bag(&r.sentence2);
        let (na, nb) = (bag_size(&a), bag_size(&b));
        let (i, u) = multiset_overlap(&a, &b);
        short += na.min(nb);
        long += na.max(nb);
        inter += i;
        uni += u;
        pairs += 1;
    }
    if pairs == 0 {
        return Err(PwiError::invalid(format!("filter `{}` selects no pairs", filter.name())));
    }
    let n = pairs as f64;
    Ok(OverlapStats {
        unit,
        filter,
        pairs,
        mean_shorter: short as f64 / n,
        mean_longer: long as f64 / n,
        mean_union: uni as f64 / n,
        mean_intersection: inter as f64 / n,
        ratio: if uni == 0 { 0.0 } else { inter as f64 / uni as f64 },
    })
}
