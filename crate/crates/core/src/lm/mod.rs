//! Auxiliary bidirectional language model and the joint objective.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};
use crate::model::BiLstmParams;
use crate::subword::Vocab;

/// Next/previous-word predictor over its own Bi-LSTM. Each direction's state
/// is projected by `tanh(W_hm · h)` and scored against a shared output layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LmHead {
    pub vocab: Vocab,
    pub lstm: BiLstmParams,
    pub proj_fwd: ParamId,
    pub proj_bwd: ParamId,
    pub out_w: ParamId,
    pub out_b: ParamId,
    /// Divide each direction's loss by its number of predictions.
    pub normalize: bool,
}

impl LmHead {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        vocab: Vocab,
        input_dim: usize,
        hidden: usize,
        proj: usize,
        normalize: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let lstm = BiLstmParams::register(store, &format!("{prefix}.lstm"), input_dim, hidden, rng)?;
        let r_h = 1.0 / (hidden as f64).sqrt();
        let r_p = 1.0 / (proj as f64).sqrt();
        let proj_fwd = store.add(format!("{prefix}.proj_fwd"), Tensor::uniform(&[proj, hidden], r_h, rng), false)?;
        let proj_bwd = store.add(format!("{prefix}.proj_bwd"), Tensor::uniform(&[proj, hidden], r_h, rng), false)?;
        let out_w = store.add(
            format!("{prefix}.out.w"),
            Tensor::uniform(&[vocab.len(), proj], r_p, rng),
            false,
        )?;
        let out_b = store.add(format!("{prefix}.out.b"), Tensor::zeros(&[vocab.len()]), false)?;
        Ok(LmHead {
            vocab,
            lstm,
            proj_fwd,
            proj_bwd,
            out_w,
            out_b,
            normalize,
        })
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        let mut ids: Vec<ParamId> = self.lstm.fwd.param_ids().into_iter().chain(self.lstm.bwd.param_ids()).collect();
        ids.extend([self.proj_fwd, self.proj_bwd, self.out_w, self.out_b]);
        ids
    }
}

/// Forward and backward LM losses of one sentence. `inputs` are the word
/// vectors the classifier sees. Fewer than two tokens gives `(0, 0)`.
pub fn lm_losses<S: AsRef<str>>(g: &mut Graph<'_>, tokens: &[S], inputs: &[Var], head: &LmHead) -> Result<(Var, Var)> {
    if tokens.len() != inputs.len() {
        return Err(PwiError::invalid(format!(
            "{} tokens but {} input vectors",
            tokens.len(),
            inputs.len()
        )));
    }
    let t = tokens.len();
    if t < 2 {
        let z = g.constant(0.0);
        return Ok((z, z));
    }
    let targets: Vec<usize> = tokens.iter().map(|w| head.vocab.id(w.as_ref())).collect();
    let (hf, hb) = head.lstm.run(g, inputs)?;
    let (pf, pb) = (g.param(head.proj_fwd), g.param(head.proj_bwd));
    let (ow, ob) = (g.param(head.out_w), g.param(head.out_b));
    let mut fwd = Vec::with_capacity(t - 1);
    let mut bwd = Vec::with_capacity(t - 1);
    for i in 0..t - 1 {
        // forward state at i predicts word i+1; backward state at i+1 predicts word i
        let m = g.matvec(pf, hf[i])?;
        let m = g.tanh(m);
        let logits = g.linear(ow, m, ob)?;
        fwd.push(g.cross_entropy(logits, targets[i + 1])?);
        let m = g.matvec(pb, hb[i + 1])?;
        let m = g.tanh(m);
        let logits = g.linear(ow, m, ob)?;
        bwd.push(g.cross_entropy(logits, targets[i])?);
    }
    let reduce = |g: &mut Graph<'_>, parts: Vec<Var>| -> Result<Var> {
        let stacked = g.concat(&parts)?;
        Ok(if head.normalize { g.mean(stacked) } else { g.sum(stacked) })
    };
    let f = reduce(g, fwd)?;
    let b = reduce(g, bwd)?;
    Ok((f, b))
}

/// `E + γ(E_fwd + E_bwd)`.
pub fn joint_loss(cls: f64, lm_fwd: f64, lm_bwd: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Ok(cls);
    }
    Ok(cls + gamma * (lm_fwd + lm_bwd))
}

/// Graph version of [`joint_loss`]; with `γ = 0` the classification node is
/// returned unchanged.
pub fn joint_loss_var(g: &mut Graph<'_>, cls: Var, lm_fwd: Var, lm_bwd: Var, gamma: f64) -> Result<Var> {
    check_gamma(gamma)?;
    if gamma == 0.0 {
        return Ok(cls);
    }
    let lm = g.add(lm_fwd, lm_bwd)?;
    let lm = g.scale(lm, gamma);
    g.add(cls, lm)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(PwiError::invalid(format!("gamma must be >= 0, got {gamma}")))
    }
}
