use crate::autodiff::{Graph, Var};
use crate::error::{PwiError, Result};

/// Weight on the word vector used when nothing else is configured.
pub const DEFAULT_WORD_WEIGHT: f64 = 0.75;

/// `alpha · word + (1 − alpha) · subword`.
pub fn combine_weighted(g: &mut Graph<'_>, word: Var, subword: Var, alpha: f64) -> Result<Var> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(PwiError::invalid(format!("combination weight {alpha} outside [0, 1]")));
    }
    if g.shape(word) != g.shape(subword) {
        return Err(PwiError::shape("combine_weighted", g.shape(word), g.shape(subword)));
    }
    let a = g.scale(word, alpha);
    let b = g.scale(subword, 1.0 - alpha);
    g.add(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    fn run(alpha: f64) -> Vec<f64> {
        let mut g = Graph::new();
        let w = g.input(Tensor::vector(vec![1.0, 1.0]));
        let s = g.input(Tensor::vector(vec![0.0, 2.0]));
        let c = combine_weighted(&mut g, w, s, alpha).unwrap();
        g.value(c).to_vec()
    }

    #[test]
    fn endpoints_and_default() {
        assert_eq!(run(1.0), vec![1.0, 1.0]);
        assert_eq!(run(0.0), vec![0.0, 2.0]);
        assert_eq!(run(0.75), vec![0.75, 1.25]);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut g = Graph::new();
        let w = g.input(Tensor::vector(vec![1.0, 1.0]));
        let s = g.input(Tensor::vector(vec![1.0, 1.0, 1.0]));
        assert!(combine_weighted(&mut g, w, s, 0.5).is_err());
        assert!(combine_weighted(&mut g, w, w, 1.5).is_err());
    }
}
