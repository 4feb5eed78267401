//! The sentence-pair network: Bi-LSTM encoding, the interaction tensor,
//! similarity focus and aggregation.

mod aggregate;
mod checkpoint;
mod config;
mod encoder;
mod interaction;
mod pwi;

pub use aggregate::{aggregate, AggregatorParams, ConvBlock, GRID_SIDE, NUM_CLASSES};
pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{Aggregation, Composition, InputMode, ModelConfig};
pub use encoder::{encode, BiLstmParams, EncodedSentence};
pub use interaction::{
    apply_focus, focus_from_scores, interact, similarity_focus, FocusMask, InteractionTensor, BACKGROUND_WEIGHT,
    BIAS_SLICE, FOCUS_WEIGHT, INTERACTION_SLICES, RANKING_SLICE,
};
pub use pwi::{Composer, LossParts, Network, PairForward, PwiModel, SubwordInput, WordCache, WordInput, POSITIVE};
