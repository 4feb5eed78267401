use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{EmbeddingTable, Vocab};
use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};

/// Filter counts per width 1..=6 for a 200-dim word vector.
const BASE_BANK: [usize; 6] = [25, 50, 75, 25, 15, 10];

/// Initial highway transform-gate bias; negative values start near the carry path.
pub const HIGHWAY_GATE_BIAS: f64 = -2.0;

/// `(width, count)` pairs whose counts sum to `word_dim`, scaled from the
/// 200-dim bank. Widths whose share rounds to zero are dropped.
pub fn default_filter_bank(word_dim: usize) -> Vec<(usize, usize)> {
    let total: usize = BASE_BANK.iter().sum();
    let exact: Vec<f64> = BASE_BANK
        .iter()
        .map(|&c| c as f64 * word_dim as f64 / total as f64)
        .collect();
    let mut counts: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut rest = word_dim - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..BASE_BANK.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .map(|(i, c)| (i + 1, c))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterGroup {
    pub width: usize,
    pub count: usize,
    /// `[count × subword_dim × width]`
    pub w: ParamId,
    /// `[count]`
    pub b: ParamId,
}

/// One highway layer: `g ⊙ tanh(W_h y + b_h) + (1 − g) ⊙ y`, `g = σ(W_t y + b_t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighwayParams {
    pub w_t: ParamId,
    pub b_t: ParamId,
    pub w_h: ParamId,
    pub b_h: ParamId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharCnnParams {
    pub filters: Vec<FilterGroup>,
    pub highway: HighwayParams,
    pub out_dim: usize,
}

impl CharCnnParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        subword_dim: usize,
        bank: &[(usize, usize)],
        init_range: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if bank.is_empty() || bank.iter().any(|&(w, c)| w == 0 || c == 0) {
            return Err(PwiError::invalid(format!("invalid filter bank {bank:?}")));
        }
        let mut filters = Vec::with_capacity(bank.len());
        for &(width, count) in bank {
            let w = store.add(
                format!("{prefix}.conv{width}.w"),
                Tensor::uniform(&[count, subword_dim, width], init_range, rng),
                false,
            )?;
            let b = store.add(format!("{prefix}.conv{width}.b"), Tensor::zeros(&[count]), false)?;
            filters.push(FilterGroup { width, count, w, b });
        }
        let q: usize = bank.iter().map(|&(_, c)| c).sum();
        let highway = HighwayParams {
            w_t: store.add(
                format!("{prefix}.highway.w_t"),
                Tensor::uniform(&[q, q], init_range, rng),
                false,
            )?,
            b_t: store.add(
                format!("{prefix}.highway.b_t"),
                Tensor::filled(&[q], HIGHWAY_GATE_BIAS),
                false,
            )?,
            w_h: store.add(
                format!("{prefix}.highway.w_h"),
                Tensor::uniform(&[q, q], init_range, rng),
                false,
            )?,
            b_h: store.add(format!("{prefix}.highway.b_h"), Tensor::zeros(&[q]), false)?,
        };
        Ok(CharCnnParams {
            filters,
            highway,
            out_dim: q,
        })
    }

    pub fn max_width(&self) -> usize {
        self.filters.iter().map(|f| f.width).max().unwrap_or(1)
    }
}

/// Pads `ids` with PAD on both sides (extra on the right) up to `width`.
pub fn pad_to_width(ids: &[usize], width: usize) -> Vec<usize> {
    if ids.len() >= width {
        return ids.to_vec();
    }
    let total = width - ids.len();
    let left = total / 2;
    let mut out = vec![Vocab::PAD_ID; left];
    out.extend_from_slice(ids);
    out.resize(width, Vocab::PAD_ID);
    out
}

/// Max-over-time features of every filter, before the highway layer.
pub fn charcnn_features(g: &mut Graph<'_>, table: &EmbeddingTable, subword_ids: &[usize], p: &CharCnnParams) -> Result<Var> {
    if subword_ids.is_empty() {
        return Err(PwiError::invalid("CharCNN composition needs at least one subword"));
    }
    let ids = pad_to_width(subword_ids, p.max_width());
    let rows = table.lookup(g, &ids)?;
    let seq = g.transpose(rows)?;
    let mut pooled = Vec::with_capacity(p.filters.len());
    for f in &p.filters {
        let (w, b) = (g.param(f.w), g.param(f.b));
        let pre = g.conv1d_bank(seq, w, b)?;
        let act = g.tanh(pre);
        pooled.push(g.max_axis(act, 1)?);
    }
    g.concat(&pooled)
}

pub fn highway(g: &mut Graph<'_>, y: Var, p: &HighwayParams) -> Result<Var> {
    let (w_t, b_t, w_h, b_h) = (g.param(p.w_t), g.param(p.b_t), g.param(p.w_h), g.param(p.b_h));
    let gate_pre = g.linear(w_t, y, b_t)?;
    let gate = g.sigmoid(gate_pre);
    let tr_pre = g.linear(w_h, y, b_h)?;
    let tr = g.tanh(tr_pre);
    let carry = g.affine(gate, -1.0, 1.0);
    let a = g.mul(gate, tr)?;
    let c = g.mul(carry, y)?;
    g.add(a, c)
}

pub fn compose_charcnn(g: &mut Graph<'_>, table: &EmbeddingTable, subword_ids: &[usize], p: &CharCnnParams) -> Result<Var> {
    let y = charcnn_features(g, table, subword_ids, p)?;
    highway(g, y, &p.highway)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn bank_for_200_matches_base() {
        assert_eq!(
            default_filter_bank(200),
            vec![(1, 25), (2, 50), (3, 75), (4, 25), (5, 15), (6, 10)]
        );
    }

    #[test]
    fn bank_sums_to_dim() {
        for d in 1..=320 {
            let bank = default_filter_bank(d);
            assert_eq!(bank.iter().map(|b| b.1).sum::<usize>(), d, "d={d}");
            assert!(bank.iter().all(|&(w, c)| w >= 1 && c >= 1));
        }
    }

    fn setup(range: f64, seed: u64, bank: &[(usize, usize)]) -> (ParamStore, EmbeddingTable, CharCnnParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let t = EmbeddingTable::random(&mut s, "sub", 10, 3, true, &mut rng).unwrap();
        let p = CharCnnParams::register(&mut s, "cnn", 3, bank, range, &mut rng).unwrap();
        (s, t, p)
    }

    #[test]
    fn short_words_are_padded() {
        let (s, t, p) = setup(0.1, 2, &[(1, 2), (4, 3)]);
        let mut g = Graph::with_params(&s);
        let w = compose_charcnn(&mut g, &t, &[3, 4], &p).unwrap();
        assert_eq!(g.shape(w), &[5]);
        assert_eq!(pad_to_width(&[7, 8], 5), vec![1, 7, 8, 1, 1]);
    }

    #[test]
    fn zero_everything_gives_zero() {
        let (mut s, t, p) = setup(0.0, 2, &[(1, 2), (2, 2)]);
        s.value_mut(t.param).data_mut().iter_mut().for_each(|v| *v = 0.0);
        s.value_mut(p.highway.b_t).data_mut().iter_mut().for_each(|v| *v = 0.0);
        let mut g = Graph::with_params(&s);
        let y = charcnn_features(&mut g, &t, &[2, 3, 4], &p).unwrap();
        assert!(g.value(y).iter().all(|&v| v == 0.0));
        let out = highway(&mut g, y, &p.highway).unwrap();
        assert!(g.value(out).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_gate_bias_carries_input() {
        let (mut s, t, p) = setup(0.3, 4, &[(2, 3)]);
        s.value_mut(p.highway.b_t).data_mut().iter_mut().for_each(|v| *v = -10.0);
        let mut g = Graph::with_params(&s);
        let y = charcnn_features(&mut g, &t, &[2, 3, 4, 5], &p).unwrap();
        let out = highway(&mut g, y, &p.highway).unwrap();
        for (a, b) in g.value(out).iter().zip(g.value(y)) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn gradient_check() {
        for seed in 0..5 {
            let (mut s, t, p) = setup(0.5, seed, &[(1, 2), (2, 2), (3, 1)]);
            let r = grad_check(&mut s, 1e-4, None, |g| {
                let w = compose_charcnn(g, &t, &[2, 5, 3, 7, 4], &p)?;
                let sq = g.mul(w, w)?;
                Ok(g.sum(sq))
            })
            .unwrap();
            assert!(r.max_rel_error < 1e-4, "{r:?}");
        }
    }
}
