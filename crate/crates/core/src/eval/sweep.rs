//! Accuracy as a function of chunk count or token-level batch size.

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::train::{run, Regime, RunConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Varies the chunk count of a chunk-wise regime.
    ChunkCount,
    /// Varies the example batch size of the baseline.
    TokenBatch,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub setting: usize,
    /// Best dev accuracy of each seed's run.
    pub accuracies: Vec<f64>,
    pub accuracy: f64,
    pub mean_tokens: f64,
    /// Mean token-level batch size over the first epoch.
    pub token_batch: f64,
}

/// Mean number of reasoning steps per sample.
pub fn mean_step_count(samples: &[Sample]) -> f64 {
    samples.iter().map(|s| s.steps.len()).sum::<usize>() as f64 / samples.len().max(1) as f64
}

/// Runs `base` at every grid setting and seed.
pub fn sweep(
    axis: SweepAxis,
    grid: &[usize],
    base: &RunConfig,
    seeds: &[u64],
    train: &[Sample],
    dev: &[Sample],
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs a non-empty grid and seed list".into()));
    }
    match axis {
        SweepAxis::ChunkCount if !matches!(base.regime, Regime::CwtAc | Regime::CwtSbc) => {
            return Err(Error::Config(format!("chunk-count sweep needs a cwt regime, got {}", base.regime)))
        }
        SweepAxis::TokenBatch if base.regime != Regime::Baseline => {
            return Err(Error::Config(format!("token-batch sweep needs the baseline regime, got {}", base.regime)))
        }
        _ => {}
    }
    let mut rows = Vec::with_capacity(grid.len());
    for &setting in grid {
        let mut accuracies = Vec::new();
        let (mut tokens, mut batch) = (0.0, 0.0);
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.train.seed = seed;
            match axis {
                SweepAxis::ChunkCount => {
                    cfg.chunks = setting;
                    if let Some(s) = cfg.search.as_mut() {
                        s.chunks = setting;
                    }
                }
                SweepAxis::TokenBatch => cfg.train.batch_size = setting,
            }
            let out = run(&cfg, train, dev)?;
            accuracies.push(out.record.best_accuracy);
            tokens += out.record.best_mean_tokens;
            batch += out.record.epochs[0].token_batch;
        }
        let n = seeds.len() as f64;
        rows.push(SweepRow {
            setting,
            accuracy: accuracies.iter().sum::<f64>() / n,
            accuracies,
            mean_tokens: tokens / n,
            token_batch: batch / n,
        });
    }
    Ok(rows)
}
