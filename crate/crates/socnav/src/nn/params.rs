//! Named parameter storage with AdamW updates and the cosine learning-rate
//! schedule.

use super::mat::Mat;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::f64::consts::PI;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

struct Param {
    value: Mat,
    grad: Mat,
    m: Mat,
    v: Mat,
}

/// Named parameters plus gradient buffers and optimizer state. Iteration
/// order is always sorted by name so updates are deterministic.
#[derive(Default)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    step: usize,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, value: Mat) {
        let (r, c) = value.shape();
        self.params.insert(
            name.to_string(),
            Param {
                value,
                grad: Mat::zeros(r, c),
                m: Mat::zeros(r, c),
                v: Mat::zeros(r, c),
            },
        );
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn value(&self, name: &str) -> &Mat {
        &self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
            .value
    }

    pub fn value_mut(&mut self, name: &str) -> &mut Mat {
        &mut self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
            .value
    }

    pub fn grad(&self, name: &str) -> &Mat {
        &self.params.get(name).unwrap().grad
    }

    pub fn grad_mut(&mut self, name: &str) -> &mut Mat {
        &mut self
            .params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter {name}"))
            .grad
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            p.grad.fill(0.0);
        }
    }

    pub fn num_params(&self) -> usize {
        self.params.values().map(|p| p.value.len()).sum()
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    /// One AdamW update over every parameter: decoupled weight decay plus
    /// a bias-corrected moment step. A non-finite gradient anywhere aborts
    /// the whole step without touching any parameter.
    pub fn adamw_step(&mut self, lr: f64, weight_decay: f64) -> Result<()> {
        for (name, p) in &self.params {
            if !p.grad.is_finite() {
                return Err(Error::Diverged(format!("non-finite gradient in {name}")));
            }
        }
        self.step += 1;
        let t = self.step as f64;
        let bc1 = 1.0 - ADAM_BETA1.powf(t);
        let bc2 = 1.0 - ADAM_BETA2.powf(t);
        for p in self.params.values_mut() {
            for i in 0..p.value.len() {
                let g = p.grad.data[i];
                p.m.data[i] = ADAM_BETA1 * p.m.data[i] + (1.0 - ADAM_BETA1) * g;
                p.v.data[i] = ADAM_BETA2 * p.v.data[i] + (1.0 - ADAM_BETA2) * g * g;
                let mhat = p.m.data[i] / bc1;
                let vhat = p.v.data[i] / bc2;
                p.value.data[i] -= lr * weight_decay * p.value.data[i];
                p.value.data[i] -= lr * mhat / (vhat.sqrt() + ADAM_EPS);
            }
        }
        Ok(())
    }

    /// Snapshot of all parameter values, e.g. for best-checkpoint keeping.
    pub fn snapshot(&self) -> Vec<(String, Mat)> {
        self.params
            .iter()
            .map(|(k, p)| (k.clone(), p.value.clone()))
            .collect()
    }

    pub fn restore(&mut self, snapshot: &[(String, Mat)]) {
        for (name, value) in snapshot {
            let p = self
                .params
                .get_mut(name)
                .unwrap_or_else(|| panic!("unknown parameter {name}"));
            p.value = value.clone();
        }
    }

    pub fn from_entries(entries: Vec<(String, Mat)>) -> Self {
        let mut store = Self::new();
        for (name, value) in entries {
            store.insert(&name, value);
        }
        store
    }
}

/// Cosine-annealing learning-rate schedule.
#[derive(Debug, Clone, Copy)]
pub struct LrSchedule {
    pub base_lr: f64,
    pub total_steps: usize,
    pub min_lr: f64,
}

impl LrSchedule {
    pub fn new(base_lr: f64, total_steps: usize, min_lr: f64) -> Result<Self> {
        if base_lr <= 0.0 || total_steps < 1 || min_lr < 0.0 || min_lr > base_lr {
            return Err(Error::BadConfig(format!(
                "invalid schedule: base_lr={base_lr}, total_steps={total_steps}, min_lr={min_lr}"
            )));
        }
        Ok(Self {
            base_lr,
            total_steps,
            min_lr,
        })
    }
}

/// Learning rate at `step` under cosine annealing.
pub fn cosine_lr(sched: &LrSchedule, step: usize) -> Result<f64> {
    if step > sched.total_steps {
        return Err(Error::StepOutOfRange {
            step,
            total: sched.total_steps,
        });
    }
    let frac = step as f64 / sched.total_steps as f64;
    Ok(sched.min_lr + 0.5 * (sched.base_lr - sched.min_lr) * (1.0 + (PI * frac).cos()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adamw_zero_grad_no_decay_is_noop() {
        let mut store = ParamStore::new();
        store.insert("w", Mat::from_vec(1, 2, vec![0.5, -0.3]));
        store.adamw_step(0.1, 0.0).unwrap();
        assert_eq!(store.value("w").data, vec![0.5, -0.3]);
    }

    #[test]
    fn adamw_zero_grad_decay_shrinks() {
        let mut store = ParamStore::new();
        store.insert("w", Mat::from_vec(1, 2, vec![1.0, -2.0]));
        store.adamw_step(0.1, 0.01).unwrap();
        // Pure multiplicative shrink by (1 - lr*wd).
        assert!((store.value("w").data[0] - 0.999).abs() < 1e-15);
        assert!((store.value("w").data[1] + 1.998).abs() < 1e-15);
    }

    #[test]
    fn adamw_single_step_matches_hand_calc() {
        // One step on a scalar with g = 1: m_hat = 1, v_hat = 1, so the
        // update is lr*wd*theta + lr/(1 + eps).
        let theta0 = 0.7;
        let lr = 0.05;
        let wd = 0.01;
        let mut store = ParamStore::new();
        store.insert("w", Mat::scalar(theta0));
        store.grad_mut("w").data[0] = 1.0;
        store.adamw_step(lr, wd).unwrap();
        let expected = theta0 - lr * wd * theta0 - lr * 1.0 / (1.0f64.sqrt() + ADAM_EPS);
        assert!((store.value("w").data[0] - expected).abs() < 1e-15);
        assert_eq!(store.step_count(), 1);
    }

    #[test]
    fn adamw_rejects_nan_grad() {
        let mut store = ParamStore::new();
        store.insert("w", Mat::scalar(1.0));
        store.grad_mut("w").data[0] = f64::NAN;
        assert!(store.adamw_step(0.1, 0.0).is_err());
        assert_eq!(store.value("w").data[0], 1.0);
        assert_eq!(store.step_count(), 0);
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let s = LrSchedule::new(1e-4, 100, 0.0).unwrap();
        assert_eq!(cosine_lr(&s, 0).unwrap(), 1e-4);
        assert!(cosine_lr(&s, 100).unwrap().abs() < 1e-20);
        assert!((cosine_lr(&s, 50).unwrap() - 5e-5).abs() < 1e-18);
        assert!(cosine_lr(&s, 101).is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(LrSchedule::new(0.0, 10, 0.0).is_err());
        assert!(LrSchedule::new(1.0, 0, 0.0).is_err());
        assert!(LrSchedule::new(1.0, 10, 2.0).is_err());
    }
}
