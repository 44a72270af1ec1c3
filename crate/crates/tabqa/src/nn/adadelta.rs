//! AdaDelta parameter updates.
//!
//! Per element:
//! ```text
//! acc_g = rho · acc_g + (1 − rho) · g²
//! delta = −sqrt(acc_u + eps) / sqrt(acc_g + eps) · g
//! acc_u = rho · acc_u + (1 − rho) · delta²
//! x    += delta
//! ```

use super::params::{Gradients, ParamStore};

pub const DEFAULT_RHO: f64 = 0.95;
pub const DEFAULT_EPS: f64 = 1e-6;

/// Applies one AdaDelta step in place. Parameters with no recorded
/// gradient are treated as zero-gradient: values stay put and both
/// accumulators decay.
pub fn adadelta_step(store: &mut ParamStore, grads: &Gradients, rho: f64, eps: f64) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        match grads.get(id) {
            Some(g) => {
                let g = g.clone();
                let (value, acc_g, acc_u) = store.adadelta_state(id);
                assert_eq!(
                    value.shape(),
                    g.shape(),
                    "gradient shape {:?} does not match parameter shape {:?}",
                    g.shape(),
                    value.shape()
                );
                for (((x, ag), au), &gv) in value
                    .data_mut()
                    .iter_mut()
                    .zip(acc_g.data_mut())
                    .zip(acc_u.data_mut())
                    .zip(g.data())
                {
                    *ag = rho * *ag + (1.0 - rho) * gv * gv;
                    let delta = -((*au + eps).sqrt() / (*ag + eps).sqrt()) * gv;
                    *au = rho * *au + (1.0 - rho) * delta * delta;
                    *x += delta;
                }
            }
            None => {
                let (_, acc_g, acc_u) = store.adadelta_state(id);
                for v in acc_g.data_mut() {
                    *v *= rho;
                }
                for v in acc_u.data_mut() {
                    *v *= rho;
                }
            }
        }
    }
}
