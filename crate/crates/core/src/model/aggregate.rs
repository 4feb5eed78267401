use rand::Rng;
use serde::{Deserialize, Serialize};

use super::interaction::INTERACTION_SLICES;
use super::Aggregation;
use crate::autodiff::{Graph, ParamId, ParamStore, Tensor, Var};
use crate::error::{PwiError, Result};

/// Spatial side the deep CNN works on; interaction tensors are padded or
/// center-cropped to it.
pub const GRID_SIDE: usize = 32;
pub const NUM_CLASSES: usize = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlock {
    pub w: ParamId,
    pub b: ParamId,
    /// Followed by 2×2 max pooling.
    pub pool: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum AggregatorParams {
    DeepCnn {
        blocks: Vec<ConvBlock>,
        out_w: ParamId,
        out_b: ParamId,
        /// Side of the feature map after the last block.
        final_side: usize,
    },
    Mlp {
        w1: ParamId,
        b1: ParamId,
        w2: ParamId,
        b2: ParamId,
    },
}

fn fan_in_range(fan_in: usize) -> f64 {
    1.0 / (fan_in as f64).sqrt()
}

impl AggregatorParams {
    pub fn register<R: Rng>(
        store: &mut ParamStore,
        prefix: &str,
        aggregation: Aggregation,
        channels: usize,
        mlp_hidden: usize,
        rng: &mut R,
    ) -> Result<Self> {
        match aggregation {
            Aggregation::DeepCnn { depth } => {
                if depth == 0 {
                    return Err(PwiError::invalid("deep-cnn depth must be at least 1"));
                }
                let mut blocks = Vec::with_capacity(depth);
                let mut side = GRID_SIDE;
                let mut in_ch = INTERACTION_SLICES;
                for k in 0..depth {
                    let fan_in = in_ch * 9;
                    let w = store.add(
                        format!("{prefix}.conv{k}.w"),
                        Tensor::uniform(&[channels, in_ch, 3, 3], fan_in_range(fan_in), rng),
                        false,
                    )?;
                    // Random rather than zero: with zero biases the padded area of the
                    // grid sits exactly at 0 and max pooling sees exact ties there.
                    let b = store.add(
                        format!("{prefix}.conv{k}.b"),
                        Tensor::uniform(&[channels], fan_in_range(fan_in), rng),
                        false,
                    )?;
                    let pool = k % 2 == 1 && side >= 2;
                    if pool {
                        side /= 2;
                    }
                    blocks.push(ConvBlock { w, b, pool });
                    in_ch = channels;
                }
                let flat = channels * side * side;
                let out_w = store.add(
                    format!("{prefix}.out.w"),
                    Tensor::uniform(&[NUM_CLASSES, flat], fan_in_range(flat), rng),
                    false,
                )?;
                let out_b = store.add(format!("{prefix}.out.b"), Tensor::zeros(&[NUM_CLASSES]), false)?;
                Ok(AggregatorParams::DeepCnn {
                    blocks,
                    out_w,
                    out_b,
                    final_side: side,
                })
            }
            Aggregation::Mlp => {
                let feat = 2 * INTERACTION_SLICES;
                Ok(AggregatorParams::Mlp {
                    w1: store.add(
                        format!("{prefix}.mlp.w1"),
                        Tensor::uniform(&[mlp_hidden, feat], fan_in_range(feat), rng),
                        false,
                    )?,
                    b1: store.add(format!("{prefix}.mlp.b1"), Tensor::zeros(&[mlp_hidden]), false)?,
                    w2: store.add(
                        format!("{prefix}.mlp.w2"),
                        Tensor::uniform(&[NUM_CLASSES, mlp_hidden], fan_in_range(mlp_hidden), rng),
                        false,
                    )?,
                    b2: store.add(format!("{prefix}.mlp.b2"), Tensor::zeros(&[NUM_CLASSES]), false)?,
                })
            }
        }
    }

    pub fn param_ids(&self) -> Vec<ParamId> {
        match self {
            AggregatorParams::DeepCnn {
                blocks, out_w, out_b, ..
            } => blocks
                .iter()
                .flat_map(|b| [b.w, b.b])
                .chain([*out_w, *out_b])
                .collect(),
            AggregatorParams::Mlp { w1, b1, w2, b2 } => vec![*w1, *b1, *w2, *b2],
        }
    }

    /// Parameters of the final classification layer.
    pub fn output_layer(&self) -> (ParamId, ParamId) {
        match self {
            AggregatorParams::DeepCnn { out_w, out_b, .. } => (*out_w, *out_b),
            AggregatorParams::Mlp { w2, b2, .. } => (*w2, *b2),
        }
    }
}

/// Two class logits from a (masked) `[13 × m × n]` interaction tensor.
pub fn aggregate(g: &mut Graph<'_>, d: Var, p: &AggregatorParams) -> Result<Var> {
    let shape = g.shape(d).to_vec();
    if shape.len() != 3 || shape[0] != INTERACTION_SLICES {
        return Err(PwiError::shape("aggregate", &shape, &[INTERACTION_SLICES]));
    }
    match p {
        AggregatorParams::DeepCnn {
            blocks,
            out_w,
            out_b,
            ..
        } => {
            let mut x = g.pad_crop(d, GRID_SIDE, GRID_SIDE)?;
            for blk in blocks {
                let (w, b) = (g.param(blk.w), g.param(blk.b));
                let c = g.conv2d(x, w, b)?;
                x = g.tanh(c);
                if blk.pool {
                    x = g.max_pool2d(x)?;
                }
            }
            let n = g.shape(x).iter().product::<usize>();
            let flat = g.reshape(x, &[n])?;
            let (w, b) = (g.param(*out_w), g.param(*out_b));
            g.linear(w, flat, b)
        }
        AggregatorParams::Mlp { w1, b1, w2, b2 } => {
            let cells = shape[1] * shape[2];
            let rows = g.reshape(d, &[INTERACTION_SLICES, cells])?;
            let mx = g.max_axis(rows, 1)?;
            let mean = g.mean_axis(rows, 1)?;
            let feats = g.concat(&[mx, mean])?;
            let (w1, b1, w2, b2) = (g.param(*w1), g.param(*b1), g.param(*w2), g.param(*b2));
            let h = g.linear(w1, feats, b1)?;
            let h = g.tanh(h);
            g.linear(w2, h, b2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mlp_zero_params_gives_biases() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = ParamStore::new();
        let p = AggregatorParams::register(&mut s, "agg", Aggregation::Mlp, 4, 8, &mut rng).unwrap();
        for id in p.param_ids() {
            s.value_mut(id).data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        let (_, b2) = p.output_layer();
        s.value_mut(b2).data_mut().copy_from_slice(&[0.3, -0.7]);
        let mut g = Graph::with_params(&s);
        let d = g.input(Tensor::zeros(&[13, 3, 4]));
        let logits = aggregate(&mut g, d, &p).unwrap();
        assert_eq!(g.value(logits), &[0.3, -0.7]);
    }

    #[test]
    fn deep_cnn_depths_give_two_logits() {
        for depth in [1, 19] {
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            let mut s = ParamStore::new();
            let p = AggregatorParams::register(&mut s, "agg", Aggregation::DeepCnn { depth }, 2, 8, &mut rng).unwrap();
            let mut g = Graph::with_params(&s);
            let d = g.input(Tensor::uniform(&[13, 5, 9], 1.0, &mut rng));
            let logits = aggregate(&mut g, d, &p).unwrap();
            assert_eq!(g.shape(logits), &[2]);
        }
    }

    #[test]
    fn pooling_stops_at_one_pixel() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::new();
        let p = AggregatorParams::register(&mut s, "agg", Aggregation::DeepCnn { depth: 18 }, 2, 8, &mut rng).unwrap();
        match p {
            AggregatorParams::DeepCnn { blocks, final_side, .. } => {
                assert_eq!(final_side, 1);
                assert_eq!(blocks.iter().filter(|b| b.pool).count(), 5);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn oversized_input_is_cropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut s = ParamStore::new();
        let p = AggregatorParams::register(&mut s, "agg", Aggregation::DeepCnn { depth: 2 }, 2, 8, &mut rng).unwrap();
        let mut g = Graph::with_params(&s);
        let d = g.input(Tensor::uniform(&[13, 40, 35], 1.0, &mut rng));
        let logits = aggregate(&mut g, d, &p).unwrap();
        assert_eq!(g.shape(logits), &[2]);
    }
}
