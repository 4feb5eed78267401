//! Subword-augmented pairwise word interaction model for paraphrase
//! identification, with its own autodiff engine, training and evaluation
//! loop, and corpus-analysis tools.

pub mod autodiff;
pub mod data;
pub mod error;
pub mod lm;
pub mod model;
pub mod subword;
pub mod train;

pub use error::{PwiError, Result};
