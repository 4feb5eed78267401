//! From spellings to word vectors: subword extraction, vocabularies,
//! embedding tables, C2W and CharCNN compositions, pretrained vectors and the
//! weighted word/subword mix.

mod c2w;
mod charcnn;
mod combine;
mod embedding;
mod scheme;
mod vocab;

pub use c2w::{compose_c2w, C2wParams};
pub use charcnn::{
    charcnn_features, compose_charcnn, default_filter_bank, highway, pad_to_width, CharCnnParams, FilterGroup,
    HighwayParams, HIGHWAY_GATE_BIAS,
};
pub use combine::{combine_weighted, DEFAULT_WORD_WEIGHT};
pub use embedding::{load_pretrained, parse_pretrained, write_vectors, EmbeddingTable, Pretrained, INIT_RANGE};
pub use scheme::{extract_subwords, SubwordScheme, SubwordUnit, END_MARK, START_MARK};
pub use vocab::{SubwordVocab, Vocab, PAD, UNK};
