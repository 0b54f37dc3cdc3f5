//! Parameters plus optimizer state, advanced one mini-batch at a time.

use rayon::prelude::*;

use super::optim::{AdamState, TrainConfig};
use super::transformer::{ModelConfig, TargetSpan, Transformer};
use super::vocab::TokenId;
use crate::error::{Error, Result};

/// One training sequence as seen by the optimizer.
#[derive(Clone, Copy, Debug)]
pub struct TrainItem<'a> {
    pub id: &'a str,
    pub tokens: &'a [TokenId],
    pub start: usize,
    pub weights: Option<&'a [f64]>,
}

/// A trainable student: model weights, Adam moments and the global step.
#[derive(Clone, Debug)]
pub struct Student {
    pub model: Transformer<f32>,
    pub adam: AdamState<f32>,
    decay: Vec<bool>,
}

impl Student {
    pub fn new(cfg: ModelConfig, seed: u64) -> Result<Self> {
        Ok(Self::from_model(Transformer::init(cfg, seed)?))
    }

    pub fn from_model(model: Transformer<f32>) -> Self {
        let n = model.param_count();
        let decay = model.layout().decay_mask();
        Student {
            model,
            adam: AdamState::new(n),
            decay,
        }
    }

    pub fn with_state(model: Transformer<f32>, adam: AdamState<f32>) -> Result<Self> {
        if adam.m.len() != model.param_count() || adam.v.len() != model.param_count() {
            return Err(Error::Checkpoint("optimizer state does not match parameter count".into()));
        }
        let decay = model.layout().decay_mask();
        Ok(Student { model, adam, decay })
    }

    pub fn step_count(&self) -> u64 {
        self.adam.step
    }

    /// Mean span loss of `batch`, followed by one AdamW update at `lr`.
    ///
    /// Gradients of the examples are computed in parallel and summed in batch
    /// order, so the result does not depend on the thread count.
    pub fn train_step(&mut self, batch: &[TrainItem<'_>], lr: f64, cfg: &TrainConfig) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Contract("empty batch".into()));
        }
        let n = self.model.param_count();
        let scale = 1.0 / batch.len() as f32;
        let model = &self.model;
        let parts: Vec<Result<(f64, Vec<f32>)>> = batch
            .par_iter()
            .map(|item| {
                let mut g = vec![0f32; n];
                let span = TargetSpan {
                    tokens: item.tokens,
                    start: item.start,
                    weights: item.weights,
                };
                let loss = model.loss_and_grad(&span, scale, &mut g)?;
                if !loss.is_finite() || g.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite {
                        example_id: item.id.to_string(),
                    });
                }
                Ok((loss, g))
            })
            .collect();
        let mut grad = vec![0f32; n];
        let mut total = 0.0;
        for part in parts {
            let (loss, g) = part?;
            total += loss;
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += b;
            }
        }
        if let Some(clip) = cfg.grad_clip {
            let norm = grad.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt();
            if norm > clip {
                let s = (clip / norm) as f32;
                grad.iter_mut().for_each(|x| *x *= s);
            }
        }
        self.adam
            .update(self.model.params_mut(), &grad, &self.decay, lr, cfg);
        Ok(total / batch.len() as f64)
    }
}
