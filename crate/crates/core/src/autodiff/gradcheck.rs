//! Central finite-difference gradient checks against the tape.

use super::param::ParamStore;
use super::tape::{Tape, Var};
use super::TensorError;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    /// Largest relative error over all checked coordinates.
    pub max_rel_error: f64,
    pub checked: usize,
    /// `(param name, flat index, analytic, numeric)` of the worst coordinate.
    pub worst: Option<(String, usize, f64, f64)>,
}

/// Gradients smaller than this are compared in absolute terms.
pub const REL_ERROR_FLOOR: f64 = 1e-3;

/// Relative error used throughout the checks: `|a - n| / max(|a|, |n|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares tape gradients of `loss_fn` with central differences for every
/// scalar of every parameter, or the first `limit` scalars per parameter.
pub fn check_params<F>(
    store: &mut ParamStore<f64>,
    eps: f64,
    limit: Option<usize>,
    loss_fn: F,
) -> Result<GradCheckReport, TensorError>
where
    F: for<'t> Fn(&'t Tape<f64>, &ParamStore<f64>) -> Result<Var<'t, f64>, TensorError>,
{
    store.zero_grad();
    {
        let tape = Tape::new();
        let loss = loss_fn(&tape, store)?;
        tape.backward(loss)?;
        tape.accumulate_param_grads(store);
    }
    let eval = |s: &ParamStore<f64>| -> Result<f64, TensorError> {
        let tape = Tape::new();
        let loss = loss_fn(&tape, s)?;
        Ok(loss.value().item())
    };
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: None };
    for id in store.ids().collect::<Vec<_>>() {
        let n = store.value(id).numel();
        for i in 0..limit.map_or(n, |l| l.min(n)) {
            let orig = store.value(id).data()[i];
            store.value_mut(id).data_mut()[i] = orig + eps;
            let plus = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig - eps;
            let minus = eval(store)?;
            store.value_mut(id).data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let analytic = store.grad(id).data()[i];
            let err = rel_error(analytic, numeric, REL_ERROR_FLOOR);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((store.name(id).to_string(), i, analytic, numeric));
            }
        }
    }
    Ok(report)
}
