//! Central finite-difference gradient checking against the tape's analytic
//! gradients. Every trainable block in the crate is expected to pass this
//! at a relative error below 1e-4 in double precision.

use super::params::ParamStore;
use super::tape::{NodeId, Tape};
use crate::{Error, Result};

pub const FD_STEP: f64 = 1e-5;

#[derive(Debug)]
pub struct GradCheckReport {
    /// Worst relative error per parameter, sorted by name.
    pub per_param: Vec<(String, f64)>,
    pub max_rel_err: f64,
    pub tol: f64,
}

impl GradCheckReport {
    pub fn pass(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

/// Compare the analytic gradient of `loss_fn` with central finite
/// differences over every element of every parameter in `store`.
///
/// `loss_fn` must rebuild the same computation each call; the loss value
/// must be finite. Relative error uses a small floor in the denominator so
/// near-zero gradients do not produce spurious failures.
pub fn grad_check<F>(store: &mut ParamStore, mut loss_fn: F, tol: f64) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> (Tape, NodeId),
{
    let (mut tape, loss) = loss_fn(store);
    let loss_value = tape.scalar_value(loss);
    if !loss_value.is_finite() {
        return Err(Error::NonFinite("grad_check loss"));
    }
    store.zero_grads();
    let grads = tape.backward(loss);
    tape.accumulate_into(&grads, store);

    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    let mut per_param = Vec::with_capacity(names.len());
    let mut max_rel = 0.0f64;

    for name in &names {
        let analytic = store.grad(name).clone();
        let n_elems = analytic.len();
        let mut worst = 0.0f64;
        for i in 0..n_elems {
            let orig = store.value(name).data[i];
            store.value_mut(name).data[i] = orig + FD_STEP;
            let (t_plus, l_plus) = loss_fn(store);
            let f_plus = t_plus.scalar_value(l_plus);
            store.value_mut(name).data[i] = orig - FD_STEP;
            let (t_minus, l_minus) = loss_fn(store);
            let f_minus = t_minus.scalar_value(l_minus);
            store.value_mut(name).data[i] = orig;
            if !f_plus.is_finite() || !f_minus.is_finite() {
                return Err(Error::NonFinite("grad_check perturbed loss"));
            }
            let numeric = (f_plus - f_minus) / (2.0 * FD_STEP);
            let a = analytic.data[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            if rel > worst {
                worst = rel;
            }
        }
        max_rel = max_rel.max(worst);
        per_param.push((name.clone(), worst));
    }

    Ok(GradCheckReport {
        per_param,
        max_rel_err: max_rel,
        tol,
    })
}
