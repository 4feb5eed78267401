use super::EncodedSentence;
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{PwiError, Result};

/// Slices per interaction tensor: (cos, L2, dot) for each of the four state
/// kinds, plus a constant bias slice.
pub const INTERACTION_SLICES: usize = 13;
pub const BIAS_SLICE: usize = 12;
/// Cosine over the concatenated states; ranks word pairs for the focus mask.
pub const RANKING_SLICE: usize = 6;

pub const FOCUS_WEIGHT: f64 = 1.0;
pub const BACKGROUND_WEIGHT: f64 = 0.1;

/// `[13 × m × n]` similarity stack.
#[derive(Clone, Copy, Debug)]
pub struct InteractionTensor {
    pub tensor: Var,
    pub m: usize,
    pub n: usize,
}

impl InteractionTensor {
    /// Values of slice `k` in row-major `m × n` order.
    pub fn slice<'g>(&self, g: &'g Graph<'_>, k: usize) -> &'g [f64] {
        let size = self.m * self.n;
        &g.value(self.tensor)[k * size..(k + 1) * size]
    }
}

pub fn interact(g: &mut Graph<'_>, a: &EncodedSentence, b: &EncodedSentence) -> Result<InteractionTensor> {
    let (m, n) = (a.len, b.len);
    let mut slices = Vec::with_capacity(INTERACTION_SLICES);
    for (x, y) in a.kinds().into_iter().zip(b.kinds()) {
        slices.push(g.pairwise_cos(x, y)?);
        slices.push(g.pairwise_l2(x, y)?);
        slices.push(g.pairwise_dot(x, y)?);
    }
    slices.push(g.input(Tensor::filled(&[m, n], 1.0)));
    let stacked = g.concat(&slices)?;
    let tensor = g.reshape(stacked, &[INTERACTION_SLICES, m, n])?;
    Ok(InteractionTensor { tensor, m, n })
}

/// Hard-attention weights over word pairs: 1.0 on a greedily chosen set of
/// non-conflicting pairs, 0.1 elsewhere.
#[derive(Clone, Debug, PartialEq)]
pub struct FocusMask {
    pub m: usize,
    pub n: usize,
    pub values: Vec<f64>,
}

impl FocusMask {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn selected(&self) -> Vec<(usize, usize)> {
        (0..self.m)
            .flat_map(|i| (0..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) == FOCUS_WEIGHT)
            .collect()
    }

    /// The `[13 × m × n]` multiplier: the mask on every similarity slice,
    /// ones on the bias slice.
    pub fn as_tensor(&self) -> Tensor {
        let mut data = Vec::with_capacity(INTERACTION_SLICES * self.values.len());
        for _ in 0..BIAS_SLICE {
            data.extend_from_slice(&self.values);
        }
        data.extend(std::iter::repeat_n(1.0, self.values.len()));
        Tensor::new(vec![INTERACTION_SLICES, self.m, self.n], data).expect("mask shape")
    }
}

/// Greedy selection over `scores` (row-major `m × n`): visit cells by
/// descending score, ties in lexicographic `(i, j)` order, and keep a cell
/// when neither its row nor its column is taken yet.
pub fn focus_from_scores(scores: &[f64], m: usize, n: usize) -> Result<FocusMask> {
    if scores.len() != m * n || m == 0 || n == 0 {
        return Err(PwiError::shape("similarity_focus", &[scores.len()], &[m, n]));
    }
    let mut order: Vec<usize> = (0..m * n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut row_used = vec![false; m];
    let mut col_used = vec![false; n];
    let mut values = vec![BACKGROUND_WEIGHT; m * n];
    let mut picked = 0;
    for idx in order {
        let (i, j) = (idx / n, idx % n);
        if row_used[i] || col_used[j] {
            continue;
        }
        row_used[i] = true;
        col_used[j] = true;
        values[idx] = FOCUS_WEIGHT;
        picked += 1;
        if picked == m.min(n) {
            break;
        }
    }
    Ok(FocusMask { m, n, values })
}

pub fn similarity_focus(g: &Graph<'_>, d: &InteractionTensor) -> Result<FocusMask> {
    focus_from_scores(d.slice(g, RANKING_SLICE), d.m, d.n)
}

/// Multiplies the interaction tensor by the mask; the mask is a constant.
pub fn apply_focus(g: &mut Graph<'_>, d: &InteractionTensor, mask: &FocusMask) -> Result<Var> {
    let w = g.input(mask.as_tensor());
    g.mul(d.tensor, w)
}
