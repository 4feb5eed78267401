use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SentencePairRecord;
use crate::autodiff::Tensor;

/// Base vocabulary of the synthetic corpus.
pub const LEXICON: [&str; 48] = [
    "sister", "brother", "mother", "father", "friend", "people", "going", "coming", "really", "happy", "tonight",
    "tomorrow", "weekend", "morning", "music", "movie", "game", "watch", "love", "hate", "great", "amazing",
    "awesome", "funny", "crazy", "little", "big", "house", "school", "party", "dinner", "coffee", "phone",
    "picture", "story", "world", "city", "airport", "flight", "news", "video", "season", "player", "team",
    "winning", "playing", "talking", "thinking",
];

const VOWELS: &[char] = &['a', 'e', 'i', 'o', 'u'];

/// Up to four social-media style respellings of `word`, all different from
/// it and from each other: a slang ending, a dropped vowel, a doubled last
/// letter and a stretched first vowel.
pub fn spelling_variants(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let mut out: Vec<String> = Vec::new();
    let mut push = |v: String| {
        if v != word && !v.is_empty() && !out.contains(&v) {
            out.push(v);
        }
    };
    if let Some(stem) = word.strip_suffix("er") {
        push(format!("{stem}a"));
    } else if let Some(stem) = word.strip_suffix("ing") {
        push(format!("{stem}in"));
    } else if let Some(stem) = word.strip_suffix('y') {
        push(format!("{stem}ie"));
    } else if let Some(stem) = word.strip_suffix('e') {
        push(stem.to_string());
    } else {
        push(format!("{word}z"));
    }
    if let Some(pos) = (1..chars.len().saturating_sub(1)).rev().find(|&i| VOWELS.contains(&chars[i])) {
        let mut c = chars.clone();
        c.remove(pos);
        push(c.into_iter().collect());
    }
    if let Some(&last) = chars.last() {
        push(format!("{word}{last}"));
    }
    if let Some(pos) = chars.iter().position(|c| VOWELS.contains(c)) {
        let mut c = chars.clone();
        c.insert(pos, chars[pos]);
        push(c.into_iter().collect());
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<SentencePairRecord>,
    /// Respelled word → the base word it came from.
    pub variant_of: BTreeMap<String, String>,
}

impl SyntheticCorpus {
    /// Base words used anywhere in the corpus.
    pub fn base_words(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .records
            .iter()
            .flat_map(|r| r.tokens())
            .filter(|t| !self.variant_of.contains_key(*t))
            .map(str::to_string)
            .collect();
        v.sort();
        v.dedup();
        v
    }
}

/// `pairs` sentence pairs, half paraphrases. Each pair starts from a random
/// sentence of 4–6 distinct base words. A paraphrase repeats it with some
/// words respelled; a non-paraphrase pairs it with the respelled version of
/// a different sentence.
pub fn synthetic_corpus(pairs: usize, seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences: Vec<Vec<&str>> = (0..pairs)
        .map(|_| {
            let len = rng.gen_range(4..=6);
            LEXICON.choose_multiple(&mut rng, len).copied().collect()
        })
        .collect();
    let mut variant_of = BTreeMap::new();
    let mut respell = |s: &[&str], rng: &mut ChaCha8Rng| -> Vec<String> {
        let forced = rng.gen_range(0..s.len());
        s.iter()
            .enumerate()
            .map(|(i, w)| {
                if i == forced || rng.gen_bool(0.3) {
                    let vars = spelling_variants(w);
                    let v = vars[rng.gen_range(0..vars.len())].clone();
                    variant_of.insert(v.clone(), w.to_string());
                    v
                } else {
                    w.to_string()
                }
            })
            .collect()
    };
    let mut partner: Vec<usize> = (0..pairs).collect();
    partner.shuffle(&mut rng);
    let mut records = Vec::with_capacity(pairs);
    for i in 0..pairs {
        let positive = i % 2 == 0;
        let mut j = partner[i];
        if !positive && j == i {
            j = (i + 1) % pairs;
        }
        let other = if positive || pairs == 1 { &sentences[i] } else { &sentences[j] };
        let s2 = respell(other, &mut rng);
        let s1 = sentences[i].iter().map(|w| w.to_string()).collect();
        records.push(
            SentencePairRecord::new(s1, s2, u8::from(positive || pairs == 1), format!("synthetic:{i}"))
                .expect("synthetic sentences are non-empty"),
        );
    }
    SyntheticCorpus { records, variant_of }
}

/// Random pretrained-style vectors for `words`, in the given order.
pub fn synthetic_vectors(words: &[String], dim: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    words
        .iter()
        .map(|w| (w.clone(), Tensor::uniform(&[dim], 0.5, &mut rng).into_data()))
        .collect()
}
