//! Adam with decoupled weight decay, linear warm-up and cosine annealing with restarts.

use serde::{Deserialize, Serialize};

use super::real::Real;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub warmup_steps: usize,
    /// Length of one cosine cycle in optimizer steps; `None` restarts once per epoch.
    pub cycle_steps: Option<usize>,
    /// Floor of each cosine cycle as a fraction of the peak.
    pub min_lr_ratio: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub grad_clip: Option<f64>,
    pub seed: u64,
}

impl TrainConfig {
    /// Hyperparameters of the full-scale recipe.
    pub fn full_scale(seed: u64) -> Self {
        TrainConfig {
            batch_size: 2,
            learning_rate: 1e-5,
            epochs: 50,
            warmup_steps: 1200,
            cycle_steps: None,
            min_lr_ratio: 0.0,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.1,
            grad_clip: None,
            seed,
        }
    }

    /// From-scratch desk preset: higher learning rate, shorter warm-up and
    /// fewer epochs for the tiny student.
    pub fn desk(seed: u64) -> Self {
        TrainConfig {
            learning_rate: 2e-3,
            epochs: 8,
            warmup_steps: 200,
            min_lr_ratio: 0.1,
            grad_clip: Some(1.0),
            ..Self::full_scale(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size > 0
            && self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && self.epochs > 0
            && self.cycle_steps.is_none_or(|c| c > 0)
            && (0.0..=1.0).contains(&self.min_lr_ratio)
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0
            && self.grad_clip.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid training config {self:?}")))
        }
    }
}

/// Learning rate as a function of the global step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub peak: f64,
    pub warmup: usize,
    pub cycle: usize,
    pub min_ratio: f64,
}

impl LrSchedule {
    pub fn at(&self, step: usize) -> f64 {
        if step < self.warmup {
            return self.peak * step as f64 / self.warmup as f64;
        }
        let pos = (step - self.warmup) % self.cycle.max(1);
        if pos == 0 {
            return self.peak;
        }
        let floor = self.peak * self.min_ratio;
        let cos = 0.5 * (1.0 + (std::f64::consts::PI * pos as f64 / self.cycle.max(1) as f64).cos());
        floor + (self.peak - floor) * cos
    }
}

/// First/second moment estimates and the step counter.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub step: u64,
}

impl<F: Real> AdamState<F> {
    pub fn new(n: usize) -> Self {
        AdamState {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            step: 0,
        }
    }

    /// One AdamW update. `lr == 0` leaves `params` bit-for-bit unchanged.
    pub fn update(&mut self, params: &mut [F], grad: &[F], decay: &[bool], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let b1 = F::c(cfg.beta1);
        let b2 = F::c(cfg.beta2);
        let one = F::one();
        let bc1 = F::c(1.0 - cfg.beta1.powi(t));
        let bc2 = F::c(1.0 - cfg.beta2.powi(t));
        let lr_f = F::c(lr);
        let eps = F::c(cfg.eps);
        let wd = F::c(lr * cfg.weight_decay);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            if lr == 0.0 {
                continue;
            }
            let mut p = params[i];
            if decay[i] {
                p -= wd * p;
            }
            p -= lr_f * mhat / (vhat.sqrt() + eps);
            params[i] = p;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn warmup_ramps_linearly_from_zero_over_exactly_the_warmup() {
        let s = LrSchedule {
            peak: 1e-5,
            warmup: 1200,
            cycle: 500,
            min_ratio: 0.0,
        };
        assert_eq!(s.at(0), 0.0);
        assert!((s.at(600) - 0.5e-5).abs() < 1e-18);
        assert!(s.at(1199) < 1e-5);
        assert_eq!(s.at(1200), 1e-5);
    }

    #[test]
    fn each_cycle_restarts_at_peak() {
        let s = LrSchedule {
            peak: 3e-4,
            warmup: 10,
            cycle: 40,
            min_ratio: 0.1,
        };
        for c in 0..5 {
            assert_eq!(s.at(10 + 40 * c), 3e-4);
            assert!(s.at(10 + 40 * c + 39) < 3e-4 * 0.11);
        }
        assert!((s.at(30) - (3e-5 + (3e-4 - 3e-5) * 0.5)).abs() < 1e-15);
    }

    #[test]
    fn zero_learning_rate_is_an_exact_no_op() {
        let cfg = TrainConfig::desk(0);
        let mut params = vec![0.3f32, -1.5, 0.0, -0.0, 7.25];
        let before = params.clone();
        let grad = vec![0.1f32, -2.0, 5.0, -3.0, 0.0];
        let mut st = AdamState::new(5);
        st.update(&mut params, &grad, &[true; 5], 0.0, &cfg);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&params), bits(&before));
        assert_eq!(st.step, 1);
    }

    #[test]
    fn full_scale_defaults() {
        let c = TrainConfig::full_scale(1);
        assert_eq!(c.batch_size, 2);
        assert_eq!(c.learning_rate, 1e-5);
        assert_eq!(c.epochs, 50);
        assert_eq!(c.warmup_steps, 1200);
        assert_eq!((c.beta1, c.beta2, c.weight_decay), (0.9, 0.95, 0.1));
        c.validate().unwrap();
        TrainConfig::desk(1).validate().unwrap();
    }
}
