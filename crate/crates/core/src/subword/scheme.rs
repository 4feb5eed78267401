use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{PwiError, Result};

pub const START_MARK: char = '^';
pub const END_MARK: char = '$';

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubwordUnit {
    CharUnigram,
    CharBigram,
    CharTrigram,
}

impl SubwordUnit {
    pub fn from_n(n: usize) -> Result<Self> {
        match n {
            1 => Ok(SubwordUnit::CharUnigram),
            2 => Ok(SubwordUnit::CharBigram),
            3 => Ok(SubwordUnit::CharTrigram),
            _ => Err(PwiError::invalid(format!("subword n must be 1, 2 or 3, got {n}"))),
        }
    }

    pub fn n(self) -> usize {
        match self {
            SubwordUnit::CharUnigram => 1,
            SubwordUnit::CharBigram => 2,
            SubwordUnit::CharTrigram => 3,
        }
    }
}

/// How words are cut into subwords. Bigrams and trigrams are always
/// boundary-marked with `^`/`$`; unigrams never are.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubwordScheme {
    unit: SubwordUnit,
}

impl SubwordScheme {
    pub fn new(unit: SubwordUnit) -> Self {
        SubwordScheme { unit }
    }

    pub fn from_n(n: usize) -> Result<Self> {
        SubwordUnit::from_n(n).map(Self::new)
    }

    pub fn unit(&self) -> SubwordUnit {
        self.unit
    }

    pub fn n(&self) -> usize {
        self.unit.n()
    }

    pub fn boundary_marking(&self) -> bool {
        self.unit != SubwordUnit::CharUnigram
    }
}

impl fmt::Display for SubwordScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "char-{}gram", self.n())
    }
}

impl FromStr for SubwordScheme {
    type Err = PwiError;

    fn from_str(s: &str) -> Result<Self> {
        let n = s
            .trim()
            .parse::<usize>()
            .map_err(|_| PwiError::invalid(format!("bad subword n `{s}`")))?;
        SubwordScheme::from_n(n)
    }
}

/// The subword sequence of `word`: characters for unigrams, otherwise a
/// sliding window over `^word$`.
pub fn extract_subwords(word: &str, scheme: SubwordScheme) -> Result<Vec<String>> {
    if word.is_empty() {
        return Err(PwiError::invalid("cannot extract subwords from an empty word"));
    }
    let n = scheme.n();
    let mut chars: Vec<char> = Vec::with_capacity(word.len() + 2);
    if scheme.boundary_marking() {
        chars.push(START_MARK);
    }
    chars.extend(word.chars());
    if scheme.boundary_marking() {
        chars.push(END_MARK);
    }
    Ok(chars.windows(n).map(|w| w.iter().collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scheme(n: usize) -> SubwordScheme {
        SubwordScheme::from_n(n).unwrap()
    }

    #[test]
    fn cat_examples() {
        assert_eq!(extract_subwords("cat", scheme(1)).unwrap(), ["c", "a", "t"]);
        assert_eq!(extract_subwords("cat", scheme(2)).unwrap(), ["^c", "ca", "at", "t$"]);
        assert_eq!(extract_subwords("cat", scheme(3)).unwrap(), ["^ca", "cat", "at$"]);
    }

    #[test]
    fn empty_word_is_rejected() {
        assert!(extract_subwords("", scheme(2)).is_err());
    }

    #[test]
    fn single_char_trigram() {
        assert_eq!(extract_subwords("a", scheme(3)).unwrap(), ["^a$"]);
    }

    #[test]
    fn marking_follows_unit() {
        assert!(!scheme(1).boundary_marking());
        assert!(scheme(2).boundary_marking());
        assert!(scheme(3).boundary_marking());
        assert!(SubwordScheme::from_n(4).is_err());
    }

    /// Independent window enumeration by index arithmetic.
    fn brute_windows(word: &str, n: usize) -> Vec<String> {
        let padded: Vec<char> = if n == 1 {
            word.chars().collect()
        } else {
            std::iter::once('^').chain(word.chars()).chain(std::iter::once('$')).collect()
        };
        let mut out = Vec::new();
        let mut start = 0;
        while start + n <= padded.len() {
            out.push(padded[start..start + n].iter().collect());
            start += 1;
        }
        out
    }

    proptest! {
        #[test]
        fn count_law(word in "\\PC{1,12}") {
            let len = word.chars().count();
            let uni = extract_subwords(&word, scheme(1)).unwrap();
            let bi = extract_subwords(&word, scheme(2)).unwrap();
            let tri = extract_subwords(&word, scheme(3)).unwrap();
            prop_assert_eq!(uni.len(), len);
            prop_assert_eq!(bi.len(), len + 1);
            prop_assert_eq!(tri.len(), len);
            prop_assert_eq!(uni, brute_windows(&word, 1));
            prop_assert_eq!(bi, brute_windows(&word, 2));
            prop_assert_eq!(tri, brute_windows(&word, 3));
        }
    }
}
