use rand::Rng;
use serde::{Deserialize, Serialize};

use super::EmbeddingTable;
use crate::autodiff::{lstm_run, Graph, LstmCellParams, ParamId, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};

/// Bi-LSTM over the subword sequence, then
/// `w = W_f · h_fwd[last] + W_b · h_bwd[first] + b`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct C2wParams {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
    pub w_f: ParamId,
    pub w_b: ParamId,
    pub b: ParamId,
    pub word_dim: usize,
}

impl C2wParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        subword_dim: usize,
        hidden: usize,
        word_dim: usize,
        init_range: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let fwd = LstmCellParams::register(store, &format!("{prefix}.fwd"), subword_dim, hidden, init_range, rng)?;
        let bwd = LstmCellParams::register(store, &format!("{prefix}.bwd"), subword_dim, hidden, init_range, rng)?;
        let w_f = store.add(
            format!("{prefix}.w_f"),
            Tensor::uniform(&[word_dim, hidden], init_range, rng),
            false,
        )?;
        let w_b = store.add(
            format!("{prefix}.w_b"),
            Tensor::uniform(&[word_dim, hidden], init_range, rng),
            false,
        )?;
        let b = store.add(format!("{prefix}.b"), Tensor::zeros(&[word_dim]), false)?;
        Ok(C2wParams {
            fwd,
            bwd,
            w_f,
            w_b,
            b,
            word_dim,
        })
    }
}

pub fn compose_c2w(g: &mut Graph<'_>, table: &EmbeddingTable, subword_ids: &[usize], p: &C2wParams) -> Result<Var> {
    if subword_ids.is_empty() {
        return Err(PwiError::invalid("C2W composition needs at least one subword"));
    }
    let seq = table.lookup(g, subword_ids)?;
    let steps: Vec<Var> = (0..subword_ids.len())
        .map(|i| g.row(seq, i))
        .collect::<Result<_>>()?;
    let fwd = lstm_run(g, &steps, &p.fwd, false)?;
    let bwd = lstm_run(g, &steps, &p.bwd, true)?;
    let (w_f, w_b, b) = (g.param(p.w_f), g.param(p.w_b), g.param(p.b));
    let a = g.matvec(w_f, *fwd.last().unwrap())?;
    let c = g.matvec(w_b, bwd[0])?;
    let s = g.add(a, c)?;
    g.add(s, b)
}
