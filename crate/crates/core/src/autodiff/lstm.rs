use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};

/// One LSTM cell. The four gates are stacked row-wise in the order
/// input, forget, output, candidate: `w_x` is `[4H × d]`, `w_h` is `[4H × H]`,
/// `b` is `[4H]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LstmCellParams {
    pub w_x: ParamId,
    pub w_h: ParamId,
    pub b: ParamId,
    pub input_dim: usize,
    pub hidden: usize,
}

impl LstmCellParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        input_dim: usize,
        hidden: usize,
        init_range: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let w_x = store.add(
            format!("{prefix}.w_x"),
            Tensor::uniform(&[4 * hidden, input_dim], init_range, rng),
            false,
        )?;
        let w_h = store.add(
            format!("{prefix}.w_h"),
            Tensor::uniform(&[4 * hidden, hidden], init_range, rng),
            false,
        )?;
        let b = store.add(
            format!("{prefix}.b"),
            Tensor::uniform(&[4 * hidden], init_range, rng),
            false,
        )?;
        Ok(LstmCellParams {
            w_x,
            w_h,
            b,
            input_dim,
            hidden,
        })
    }

    pub fn param_ids(&self) -> [ParamId; 3] {
        [self.w_x, self.w_h, self.b]
    }
}

/// `(h, c)` after one step:
/// `i,f,o = σ(·)`, `g = tanh(·)`, `c = f⊙c_prev + i⊙g`, `h = o⊙tanh(c)`.
pub fn lstm_step(
    g: &mut Graph<'_>,
    x: Var,
    h_prev: Var,
    c_prev: Var,
    p: &LstmCellParams,
) -> Result<(Var, Var)> {
    let hd = p.hidden;
    if g.shape(x) != [p.input_dim] || g.shape(h_prev) != [hd] || g.shape(c_prev) != [hd] {
        return Err(PwiError::shape("lstm_step", g.shape(x), &[p.input_dim, hd]));
    }
    let (w_x, w_h, b) = (g.param(p.w_x), g.param(p.w_h), g.param(p.b));
    let zx = g.matvec(w_x, x)?;
    let zh = g.matvec(w_h, h_prev)?;
    let z = g.add(zx, zh)?;
    let z = g.add(z, b)?;
    let zi = g.slice(z, 0, hd)?;
    let zf = g.slice(z, hd, hd)?;
    let zo = g.slice(z, 2 * hd, hd)?;
    let zg = g.slice(z, 3 * hd, hd)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let o = g.sigmoid(zo);
    let cand = g.tanh(zg);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Runs a cell over `inputs` in the given order from zero state; returns the
/// hidden state after each step, aligned with `inputs`.
pub fn lstm_run(g: &mut Graph<'_>, inputs: &[Var], p: &LstmCellParams, reverse: bool) -> Result<Vec<Var>> {
    let mut h = g.input(Tensor::zeros(&[p.hidden]));
    let mut c = g.input(Tensor::zeros(&[p.hidden]));
    let mut out = vec![h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        let (nh, nc) = lstm_step(g, inputs[t], h, c, p)?;
        h = nh;
        c = nc;
        out[t] = h;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cell(range: f64, seed: u64) -> (ParamStore, LstmCellParams) {
        let mut s = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = LstmCellParams::register(&mut s, "cell", 3, 2, range, &mut rng).unwrap();
        (s, p)
    }

    #[test]
    fn zero_params_zero_state() {
        let (s, p) = cell(0.0, 0);
        let mut g = Graph::with_params(&s);
        let x = g.input(Tensor::vector(vec![0.3, -1.0, 2.0]));
        let h0 = g.input(Tensor::zeros(&[2]));
        let c0 = g.input(Tensor::zeros(&[2]));
        let (h, c) = lstm_step(&mut g, x, h0, c0, &p).unwrap();
        assert_eq!(g.value(h), &[0.0, 0.0]);
        assert_eq!(g.value(c), &[0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_the_cell() {
        let (s, p) = cell(0.0, 0);
        let mut g = Graph::with_params(&s);
        let x = g.input(Tensor::vector(vec![1.0, 1.0, 1.0]));
        let h0 = g.input(Tensor::zeros(&[2]));
        let c0 = g.input(Tensor::vector(vec![0.8, -2.0]));
        let (h, c) = lstm_step(&mut g, x, h0, c0, &p).unwrap();
        assert_eq!(g.value(c), &[0.4, -1.0]);
        let expect = [0.5 * 0.4f64.tanh(), 0.5 * (-1.0f64).tanh()];
        for (a, b) in g.value(h).iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let (s, p) = cell(0.1, 0);
        let mut g = Graph::with_params(&s);
        let x = g.input(Tensor::vector(vec![1.0, 1.0]));
        let h0 = g.input(Tensor::zeros(&[2]));
        let c0 = g.input(Tensor::zeros(&[2]));
        assert!(lstm_step(&mut g, x, h0, c0, &p).is_err());
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        for seed in 0..5 {
            let (mut s, p) = cell(0.5, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let xid = s
                .add("x", Tensor::uniform(&[3], 1.0, &mut rng), false)
                .unwrap();
            let r = grad_check(&mut s, 1e-4, None, |g| {
                let x = g.param(xid);
                let h0 = g.input(Tensor::zeros(&[2]));
                let c0 = g.input(Tensor::vector(vec![0.2, -0.3]));
                let (h, _) = lstm_step(g, x, h0, c0, &p)?;
                Ok(g.sum(h))
            })
            .unwrap();
            assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
        }
    }
}
