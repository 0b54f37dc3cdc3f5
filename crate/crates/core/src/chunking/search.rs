use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::plan::ChunkPlan;
use super::score::Scorer;
use crate::corpus::Sample;
use crate::error::{Error, Result};

/// Probabilistic acceptance of boundary moves that fail the greedy test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Anneal {
    pub temperature: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub chunks: usize,
    /// Minimum loss improvement required to move a boundary.
    pub eta: f64,
    pub anneal: Option<Anneal>,
}

impl SearchConfig {
    pub fn new(chunks: usize) -> Self {
        SearchConfig {
            chunks,
            eta: 0.1,
            anneal: None,
        }
    }

    pub fn with_anneal(mut self, seed: u64) -> Self {
        self.anneal = Some(Anneal {
            temperature: 0.1,
            seed,
        });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.chunks == 0 {
            return Err(Error::Config("chunk count must be at least 1".into()));
        }
        if self.eta.is_nan() || self.eta < 0.0 {
            return Err(Error::Config(format!("eta must be >= 0, got {}", self.eta)));
        }
        if let Some(a) = self.anneal {
            if a.temperature.is_nan() || a.temperature <= 0.0 {
                return Err(Error::Config("annealing temperature must be > 0".into()));
            }
        }
        Ok(())
    }
}

fn join(units: &[(String, String)], r: Range<usize>) -> String {
    let mut text = String::new();
    for i in r.clone() {
        text.push_str(&units[i].0);
        if i + 1 < r.end {
            text.push_str(&units[i].1);
        }
    }
    text
}

fn stream_for(seed: u64, sample_id: &str) -> ChaCha8Rng {
    // FNV-1a keeps the per-sample stream stable across platforms and runs.
    let mut h: u64 = 0xcbf29ce484222325;
    for b in sample_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(h);
    rng
}

/// Greedy boundary search: for each adjacent pair of chunks, re-cut the
/// boundary where the left chunk's stage loss is lowest, if that beats the
/// current chunk's loss by more than `eta`.
pub fn search_chunk<S: Scorer + ?Sized>(
    plan: &ChunkPlan,
    sample: &Sample,
    scorer: &S,
    cfg: &SearchConfig,
) -> Result<ChunkPlan> {
    cfg.validate()?;
    plan.validate_for(sample)?;
    if plan.num_chunks() > cfg.chunks {
        return Err(Error::Contract(format!(
            "plan for {} has {} chunks, search configured for {}",
            sample.id,
            plan.num_chunks(),
            cfg.chunks
        )));
    }
    let units = plan.units_with_separators(sample);
    let mut bounds = plan.boundaries.clone();
    let mut rng = cfg.anneal.map(|a| stream_for(a.seed, &sample.id));
    for m in 0..bounds.len().saturating_sub(1) {
        let start = if m == 0 { 0 } else { bounds[m - 1] };
        let end = bounds[m + 1];
        let current = bounds[m] - start;
        let mut prior = Vec::with_capacity(m);
        let mut s = 0;
        for &b in &bounds[..m] {
            prior.push(join(&units, s..b));
            s = b;
        }
        let candidates: Vec<String> = (1..end - start).map(|idx| join(&units, start..start + idx)).collect();
        let losses = scorer
            .score_many(m, &sample.question, &prior, &candidates)
            .map_err(|e| Error::Scorer {
                sample_id: sample.id.clone(),
                stage: m,
                source: Box::new(e),
            })?;
        let l_c = losses[current - 1];
        let mut l_min = f64::INFINITY;
        let mut index = current;
        for (i, &l) in losses.iter().enumerate() {
            if l < l_min {
                l_min = l;
                index = i + 1;
            }
        }
        let gain = l_c - l_min;
        if gain > cfg.eta {
            bounds[m] = start + index;
        } else if let (Some(a), Some(rng)) = (cfg.anneal, rng.as_mut()) {
            if index != current {
                let p = (-(cfg.eta - gain) / a.temperature).exp().clamp(0.0, 1.0);
                if rng.random::<f64>() < p {
                    bounds[m] = start + index;
                }
            }
        }
    }
    ChunkPlan::from_boundaries(&plan.sample_id, plan.unit, bounds)
}
