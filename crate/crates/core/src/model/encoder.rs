use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{lstm_run, Graph, LstmCellParams, ParamStore, Var};
use crate::error::{PwiError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiLstmParams {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
}

impl BiLstmParams {
    pub fn register<R: Rng>(store: &mut ParamStore, prefix: &str, input_dim: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let range = 1.0 / (hidden as f64).sqrt();
        Ok(BiLstmParams {
            fwd: LstmCellParams::register(store, &format!("{prefix}.fwd"), input_dim, hidden, range, rng)?,
            bwd: LstmCellParams::register(store, &format!("{prefix}.bwd"), input_dim, hidden, range, rng)?,
        })
    }

    pub fn hidden(&self) -> usize {
        self.fwd.hidden
    }

    /// Per-step states of both directions, each aligned with `inputs`.
    pub fn run(&self, g: &mut Graph<'_>, inputs: &[Var]) -> Result<(Vec<Var>, Vec<Var>)> {
        Ok((lstm_run(g, inputs, &self.fwd, false)?, lstm_run(g, inputs, &self.bwd, true)?))
    }
}

/// Context states of one sentence, each stored as a `[len × dim]` matrix.
#[derive(Clone, Copy, Debug)]
pub struct EncodedSentence {
    pub fwd: Var,
    pub bwd: Var,
    /// `[h_fwd, h_bwd]`, width `2H`.
    pub cat: Var,
    /// `h_fwd + h_bwd`, width `H`.
    pub sum: Var,
    pub len: usize,
}

impl EncodedSentence {
    /// The four state kinds in interaction-tensor order.
    pub fn kinds(&self) -> [Var; 4] {
        [self.fwd, self.bwd, self.cat, self.sum]
    }
}

/// Bi-LSTM encoding from zero initial states.
pub fn encode(g: &mut Graph<'_>, words: &[Var], p: &BiLstmParams) -> Result<EncodedSentence> {
    if words.is_empty() {
        return Err(PwiError::invalid("cannot encode an empty sentence"));
    }
    let (f, b) = p.run(g, words)?;
    let cat_rows: Vec<Var> = f
        .iter()
        .zip(&b)
        .map(|(&x, &y)| g.concat(&[x, y]))
        .collect::<Result<_>>()?;
    let fwd = g.stack_rows(&f)?;
    let bwd = g.stack_rows(&b)?;
    let cat = g.stack_rows(&cat_rows)?;
    let sum = g.add(fwd, bwd)?;
    Ok(EncodedSentence {
        fwd,
        bwd,
        cat,
        sum,
        len: words.len(),
    })
}
