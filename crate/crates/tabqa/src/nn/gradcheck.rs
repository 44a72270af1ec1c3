//! Central finite-difference validation of analytic gradients.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{Gradients, ParamId, ParamStore};

/// Outcome of one finite-difference sweep.
#[derive(Debug, Clone)]
pub struct FiniteDiffReport {
    pub max_rel_err: f64,
    /// (parameter name, flat coordinate) of the worst disagreement.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub tolerance: f64,
}

impl FiniteDiffReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tolerance
    }
}

/// Relative error with an absolute floor of 1e-8 at the default 1e-4
/// tolerance: `|a − n| / max(|a|, |n|, 1e-4)`.
fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-4)
}

/// Compares analytic gradients to central finite differences on up to
/// `samples_per_param` coordinates of every parameter. The forward closure
/// must be a deterministic function of the store.
pub fn finite_diff_check<F>(
    store: &mut ParamStore,
    forward: F,
    grads: &Gradients,
    samples_per_param: usize,
    rng: &mut ChaCha8Rng,
    tolerance: f64,
) -> FiniteDiffReport
where
    F: Fn(&ParamStore) -> f64,
{
    let mut report = FiniteDiffReport {
        max_rel_err: 0.0,
        worst: None,
        checked: 0,
        tolerance,
    };
    let ids: Vec<ParamId> = store.ids().collect();
    for id in ids {
        let len = store.value(id).len();
        if len == 0 {
            continue;
        }
        let coords: Vec<usize> = if len <= samples_per_param {
            (0..len).collect()
        } else {
            (0..samples_per_param).map(|_| rng.gen_range(0..len)).collect()
        };
        for coord in coords {
            let original = store.value(id).data()[coord];
            let h = 1e-5 * original.abs().max(1.0);

            store.value_mut(id).data_mut()[coord] = original + h;
            let plus = forward(store);
            store.value_mut(id).data_mut()[coord] = original - h;
            let minus = forward(store);
            store.value_mut(id).data_mut()[coord] = original;

            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads
                .get(id)
                .map(|t| t.data()[coord])
                .unwrap_or(0.0);
            let err = rel_err(analytic, numeric);
            report.checked += 1;
            if err > report.max_rel_err {
                report.max_rel_err = err;
                report.worst = Some((store.name(id).to_string(), coord));
            }
        }
    }
    report
}
