use super::{Graph, ParamId, ParamStore, Var};
use crate::error::{PwiError, Result};

/// Worst coordinate found by [`grad_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_param: Option<String>,
    pub worst_index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub coordinates: usize,
}

/// Compares backward-pass gradients with central differences
/// `(f(x+eps) − f(x−eps)) / 2eps` on every coordinate of every trainable
/// parameter (or of `only`, when given).
///
/// The error per coordinate is `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn grad_check<F>(
    store: &mut ParamStore,
    eps: f64,
    only: Option<&[ParamId]>,
    f: F,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<'_>) -> Result<Var>,
{
    let eval = |store: &ParamStore| -> Result<f64> {
        let mut g = Graph::with_params(store);
        let out = f(&mut g)?;
        Ok(g.scalar(out))
    };

    let grads = {
        let mut g = Graph::with_params(store);
        let out = f(&mut g)?;
        let first = g.scalar(out);
        let grads = g.backward(out)?;
        let second = eval(store)?;
        if first.to_bits() != second.to_bits() {
            return Err(PwiError::NonDeterministic { first, second });
        }
        grads
    };

    let ids: Vec<ParamId> = match only {
        Some(ids) => ids.to_vec(),
        None => store
            .iter()
            .filter(|(_, p)| !p.frozen)
            .map(|(id, _)| id)
            .collect(),
    };

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_param: None,
        worst_index: 0,
        analytic: 0.0,
        numeric: 0.0,
        coordinates: 0,
    };
    for id in ids {
        let n = store.value(id).numel();
        let analytic: Vec<f64> = grads
            .get(id)
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; n]);
        for k in 0..n {
            let orig = store.value(id).data()[k];
            store.value_mut(id).data_mut()[k] = orig + eps;
            let plus = eval(store);
            store.value_mut(id).data_mut()[k] = orig - eps;
            let minus = eval(store);
            store.value_mut(id).data_mut()[k] = orig;
            let numeric = (plus? - minus?) / (2.0 * eps);
            let a = analytic[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            report.coordinates += 1;
            if err > report.max_rel_error || report.worst_param.is_none() {
                report.max_rel_error = err;
                report.worst_param = Some(store.get(id).name.clone());
                report.worst_index = k;
                report.analytic = a;
                report.numeric = numeric;
            }
        }
    }
    Ok(report)
}
