use crate::error::{PwiError, Result};
use crate::model::PwiModel;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na * nb < 1e-12 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Top `k` candidates by cosine to `query`, descending, ties broken by word.
/// A candidate named `exclude` is skipped.
pub fn nearest_neighbors(
    query: &[f64],
    candidates: &[(String, Vec<f64>)],
    k: usize,
    exclude: Option<&str>,
) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = candidates
        .iter()
        .filter(|(w, _)| Some(w.as_str()) != exclude)
        .map(|(w, v)| (w.clone(), cosine(query, v)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    scored.truncate(k);
    scored
}

/// Vectors of every word in the model's vocabulary, as the model embeds them.
pub fn vocabulary_vectors(model: &PwiModel, words: &[String]) -> Result<Vec<(String, Vec<f64>)>> {
    words.iter().map(|w| Ok((w.clone(), model.embed_word(w)?))).collect()
}

/// Neighbors of `word` among `vocabulary` in `model`'s embedding space.
pub fn model_neighbors(model: &PwiModel, word: &str, vocabulary: &[(String, Vec<f64>)], k: usize) -> Result<Vec<(String, f64)>> {
    if word.is_empty() {
        return Err(PwiError::invalid("query word is empty"));
    }
    let q = model.embed_word(word)?;
    Ok(nearest_neighbors(&q, vocabulary, k, Some(word)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cands() -> Vec<(String, Vec<f64>)> {
        vec![
            ("b".into(), vec![1.0, 0.0]),
            ("a".into(), vec![2.0, 0.0]),
            ("c".into(), vec![0.0, 1.0]),
            ("d".into(), vec![-1.0, 0.5]),
        ]
    }

    #[test]
    fn identical_vector_first_and_ties_lexicographic() {
        let n = nearest_neighbors(&[1.0, 0.0], &cands(), 2, None);
        assert_eq!(n, vec![("a".to_string(), 1.0), ("b".to_string(), 1.0)]);
        let n = nearest_neighbors(&[1.0, 0.0], &cands(), 10, Some("a"));
        assert_eq!(n.len(), 3);
        assert_eq!(n[0].0, "b");
    }
}
