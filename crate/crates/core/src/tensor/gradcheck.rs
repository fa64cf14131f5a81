//! Central finite-difference checks of tape gradients.

use rand::seq::index::sample;
use rand::Rng;

use super::{ParamStore, Result, Tape, Var};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_relative_error: f64,
    /// Name and flat index of the worst entry.
    pub worst: Option<(String, usize)>,
}

/// Relative error with a floor on the denominator so entries whose true
/// gradient is (numerically) zero are compared absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

/// Compares backward gradients of `loss_fn` with central differences on up
/// to `per_param` randomly chosen entries of every parameter.
pub fn check_params<F>(store: &ParamStore, mut loss_fn: F, per_param: usize, h: f64, rng: &mut impl Rng) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &ParamStore) -> Result<Var>,
{
    let mut work = store.clone();
    work.zero_grads();
    let mut tape = Tape::new();
    let loss = loss_fn(&mut tape, &work)?;
    let grads = tape.backward(loss)?;
    tape.accumulate_param_grads(&grads, &mut work);
    let analytic = work.clone();
    let mut report = GradCheckReport { checked: 0, max_relative_error: 0.0, worst: None };
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let len = store.value(id).data().len();
        let picks = sample(rng, len, per_param.min(len)).into_vec();
        for k in picks {
            let base = work.value(id).data()[k];
            work.value_mut(id).data_mut()[k] = base + h;
            let mut t = Tape::new();
            let l = loss_fn(&mut t, &work)?;
            let plus = t.scalar(l);
            work.value_mut(id).data_mut()[k] = base - h;
            let mut t = Tape::new();
            let l = loss_fn(&mut t, &work)?;
            let minus = t.scalar(l);
            work.value_mut(id).data_mut()[k] = base;
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic.grad(id).map_or(0.0, |g| g.data()[k]);
            let err = relative_error(a, numeric);
            report.checked += 1;
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst = Some((store.name(id).to_string(), k));
            }
        }
    }
    Ok(report)
}
