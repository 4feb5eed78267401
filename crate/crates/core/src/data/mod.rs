//! Corpus ingestion and the analysis tools: overlap and OOV statistics, the
//! n-gram logistic-regression baseline, nearest neighbors and a synthetic
//! paraphrase corpus.

mod baseline;
mod formats;
mod neighbors;
mod oov;
mod overlap;
mod record;
mod stem;
mod synthetic;

pub use baseline::{ngram_lr_baseline, LogRegConfig, LogisticRegression, NgramFeatureVector, NUM_FEATURES};
pub use formats::{load_pairs, parse_pairs, DataFormat, LoadOptions, LoadReport, MAX_MALFORMED_FRACTION};
pub use neighbors::{cosine, model_neighbors, nearest_neighbors, vocabulary_vectors};
pub use oov::{oov_stats, OovStats};
pub use overlap::{
    bag_size, char_ngrams, multiset_overlap, overlap_stats, word_ngrams, NgramBag, OverlapStats, OverlapUnit,
    PairFilter,
};
pub use record::{lowercase_tokens, tokenize, SentencePairRecord};
pub use stem::stem;
pub use synthetic::{spelling_variants, synthetic_corpus, synthetic_vectors, SyntheticCorpus, LEXICON};
