use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{extract_subwords, SubwordScheme};
use crate::error::Result;

pub const UNK: &str = "<unk>";
pub const PAD: &str = "<pad>";

/// String-to-id map with `<unk>` at 0 and `<pad>` at 1. Ids are dense.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Vocab::new()
    }
}

impl Vocab {
    pub const UNK_ID: usize = 0;
    pub const PAD_ID: usize = 1;

    pub fn new() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.insert(UNK);
        v.insert(PAD);
        v
    }

    /// Tokens with frequency `>= min_freq`, in lexicographic order after the
    /// two specials, so the layout does not depend on corpus order.
    pub fn from_counts<'a>(tokens: impl IntoIterator<Item = &'a str>, min_freq: usize) -> Self {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        let mut v = Vocab::new();
        for (t, c) in counts {
            if c >= min_freq {
                v.insert(t);
            }
        }
        v
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Id of `token`, or the UNK id.
    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(Self::UNK_ID)
    }

    pub fn token(&self, id: usize) -> &str {
        &self.tokens[id]
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Words other than the two specials.
    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.tokens[2..].iter().map(String::as_str)
    }

    /// `token\tid` per line.
    pub fn write_tsv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (i, t) in self.tokens.iter().enumerate() {
            writeln!(w, "{t}\t{i}")?;
        }
        Ok(())
    }
}

/// Subword vocabulary tied to the scheme that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubwordVocab {
    pub scheme: SubwordScheme,
    pub vocab: Vocab,
}

impl SubwordVocab {
    pub fn build<'a>(words: impl IntoIterator<Item = &'a str>, scheme: SubwordScheme) -> Result<Self> {
        let mut all = Vec::new();
        for w in words {
            all.extend(extract_subwords(w, scheme)?);
        }
        Ok(SubwordVocab {
            scheme,
            vocab: Vocab::from_counts(all.iter().map(String::as_str), 1),
        })
    }

    /// Subword ids of `word`; unseen subwords map to UNK.
    pub fn ids(&self, word: &str) -> Result<Vec<usize>> {
        Ok(extract_subwords(word, self.scheme)?
            .iter()
            .map(|s| self.vocab.id(s))
            .collect())
    }

    pub fn len(&self) -> usize {
        self.vocab.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vocab.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn specials_first_and_dense() {
        let v = Vocab::from_counts(["b", "a", "b"], 1);
        assert_eq!(v.tokens(), ["<unk>", "<pad>", "a", "b"]);
        assert_eq!(v.id("zzz"), Vocab::UNK_ID);
        assert_eq!(v.id("b"), 3);
    }

    #[test]
    fn min_freq_cutoff() {
        let v = Vocab::from_counts(["x", "y", "y"], 2);
        assert!(!v.contains("x"));
        assert!(v.contains("y"));
    }

    #[test]
    fn shared_subwords_share_ids() {
        let sv = SubwordVocab::build(["sister", "sista"], SubwordScheme::from_n(2).unwrap()).unwrap();
        let a = sv.ids("sister").unwrap();
        let b = sv.ids("sista").unwrap();
        // ^s, si, is, st are common to both spellings.
        assert_eq!(a[..4], b[..4]);
        assert_ne!(a[4], b[4]);
    }

    #[test]
    fn tsv_dump() {
        let v = Vocab::from_counts(["a"], 1);
        let mut buf = Vec::new();
        v.write_tsv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "<unk>\t0\n<pad>\t1\na\t2\n");
    }

    #[test]
    fn serde_round_trip() {
        let v = Vocab::from_counts(["q", "r"], 1);
        let back: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.id("r"), v.id("r"));
    }
}
