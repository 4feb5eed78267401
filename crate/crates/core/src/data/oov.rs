use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SentencePairRecord;
use crate::subword::Vocab;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OovStats {
    pub inv: usize,
    pub oov: usize,
    /// `oov / (oov + inv)`; 0 for a corpus without tokens.
    pub ratio: f64,
}

/// Unique token types of the corpus split by presence in `vocab` (the special
/// `<unk>`/`<pad>` entries never count as present).
pub fn oov_stats(records: &[SentencePairRecord], vocab: &Vocab, lowercase: bool) -> OovStats {
    let types: BTreeSet<String> = records
        .iter()
        .flat_map(|r| r.tokens())
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect();
    let inv = types
        .iter()
        .filter(|t| vocab.get(t).is_some_and(|id| id >= 2))
        .count();
    let oov = types.len() - inv;
    let ratio = if types.is_empty() { 0.0 } else { oov as f64 / types.len() as f64 };
    OovStats { inv, oov, ratio }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremes() {
        let r = [SentencePairRecord::from_text("a b", "b c", 1, "t").unwrap()];
        let s = oov_stats(&r, &Vocab::new(), false);
        assert_eq!((s.inv, s.oov, s.ratio), (0, 3, 1.0));
        let v = Vocab::from_counts(["a", "b", "c", "d"], 1);
        assert_eq!(oov_stats(&r, &v, false).ratio, 0.0);
        let upper = [SentencePairRecord::from_text("A", "b", 1, "t").unwrap()];
        assert_eq!(oov_stats(&upper, &v, false).oov, 1);
        assert_eq!(oov_stats(&upper, &v, true).oov, 0);
    }
}
