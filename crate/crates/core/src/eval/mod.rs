//! Accuracy, generation length, confidence and speedup measurements.

pub mod decode;
mod report;
mod sweep;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use decode::{generate, staged_rollout, DecodeMode, Generation, GENERATION_CAP};
pub use report::{load_trace, render_summary, save_trace, summary_csv, SummaryRow};
pub use sweep::{mean_step_count, sweep, SweepAxis, SweepRow};

use crate::chunking::ChunkPlan;
use crate::corpus::{extract_answer, Sample};
use crate::databuild::core_char_mask;
use crate::error::{Error, Result};
use crate::layout;
use crate::model::{token_confidences, LanguageModel, Vocabulary};

/// Per-query outcome, persisted as one trace line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub sample_id: String,
    pub gold: String,
    pub prediction: Option<String>,
    pub correct: bool,
    pub tokens: usize,
    pub hit_cap: bool,
    pub wall_ms: f64,
    /// Mean probability of the emitted tokens.
    pub self_confidence: f64,
    pub output: String,
}

/// Mean teacher-forced probability (x100) of core and other rationale tokens.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confidence {
    pub core: f64,
    pub other: f64,
    /// `other - core`.
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: DecodeMode,
    pub samples: usize,
    pub accuracy: f64,
    pub mean_tokens: f64,
    pub mean_wall_ms: f64,
    /// Fraction of queries that ran into the generation cap.
    pub cap_rate: f64,
    pub self_confidence: f64,
    pub confidence: Option<Confidence>,
    #[serde(skip)]
    pub records: Vec<TraceRecord>,
}

impl EvalReport {
    /// Aggregates per-query records; every field is a plain mean over them.
    pub fn from_records(mode: DecodeMode, records: Vec<TraceRecord>) -> Self {
        let n = records.len().max(1) as f64;
        let mean = |f: &dyn Fn(&TraceRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        EvalReport {
            mode,
            samples: records.len(),
            accuracy: mean(&|r| f64::from(u8::from(r.correct))),
            mean_tokens: mean(&|r| r.tokens as f64),
            mean_wall_ms: mean(&|r| r.wall_ms),
            cap_rate: mean(&|r| f64::from(u8::from(r.hit_cap))),
            self_confidence: mean(&|r| r.self_confidence),
            confidence: None,
            records,
        }
    }
}

/// Answers every sample under `mode` and scores the answers.
pub fn evaluate<M: LanguageModel + ?Sized>(model: &M, samples: &[Sample], mode: DecodeMode) -> Result<EvalReport> {
    let records = samples
        .par_iter()
        .map(|s| {
            let t0 = Instant::now();
            let g = generate(model, &s.question, mode, GENERATION_CAP)?;
            let wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            let output = g.text();
            let prediction = extract_answer(&output, s.task_kind);
            let self_confidence = if g.probs.is_empty() {
                0.0
            } else {
                g.probs.iter().sum::<f64>() / g.probs.len() as f64
            };
            Ok(TraceRecord {
                sample_id: s.id.clone(),
                gold: s.answer.clone(),
                correct: prediction.as_deref() == Some(s.answer.as_str()),
                prediction,
                tokens: g.tokens,
                hit_cap: g.hit_cap,
                wall_ms,
                self_confidence,
                output,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_records(mode, records))
}

/// Generated-token speedup of skip-thinking over full chunk-wise thinking.
pub fn speedup_ratio(full: &EvalReport, skip: &EvalReport) -> Result<f64> {
    if full.samples != skip.samples {
        return Err(Error::Contract(format!(
            "reports cover {} and {} samples",
            full.samples, skip.samples
        )));
    }
    if skip.mean_tokens == 0.0 {
        return Err(Error::Contract("skip report generated no tokens".into()));
    }
    Ok(full.mean_tokens / skip.mean_tokens)
}

/// Wall-time counterpart of [`speedup_ratio`].
pub fn wall_speedup(full: &EvalReport, skip: &EvalReport) -> f64 {
    full.mean_wall_ms / skip.mean_wall_ms.max(f64::MIN_POSITIVE)
}

/// How gold rationales are presented when measuring confidence.
#[derive(Clone, Copy, Debug)]
pub enum ConfidenceLayout<'a> {
    /// After `q \n`, as in full-rationale training.
    Full,
    /// Chunk by chunk under stage tags, one plan per sample.
    Staged(&'a [ChunkPlan]),
}

/// Teacher-forced confidence of the gold rationale, split by core and other tokens.
pub fn confidence_report<M: LanguageModel + ?Sized>(
    model: &M,
    samples: &[Sample],
    layout_kind: ConfidenceLayout<'_>,
) -> Result<Confidence> {
    let per_sample = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let mask = core_char_mask(s)?;
            let rationale = s.rationale();
            let mut probs = vec![f64::NAN; rationale.len()];
            match layout_kind {
                ConfidenceLayout::Full => {
                    let p = token_confidences(model, &layout::question(&s.question), &Vocabulary.encode(&rationale))?;
                    probs.copy_from_slice(&p);
                }
                ConfidenceLayout::Staged(plans) => {
                    let plan = plans
                        .get(i)
                        .ok_or_else(|| Error::Contract("missing chunk plan for confidence report".into()))?;
                    let chunks = plan.chunk_texts(s)?;
                    let n = chunks.len();
                    let mut offset = 0;
                    for m in 0..n {
                        let prefix = crate::layout::staged_prefix(
                            crate::databuild::StagePrefix::Fixed.tag(m, n)?,
                            &s.question,
                            &chunks[..m],
                        );
                        let p = token_confidences(model, &prefix, &Vocabulary.encode(&chunks[m]))?;
                        probs[offset..offset + p.len()].copy_from_slice(&p);
                        offset += p.len() + 1;
                    }
                }
            }
            let (mut core, mut other) = ((0.0, 0usize), (0.0, 0usize));
            for (p, &m) in probs.iter().zip(&mask).filter(|(p, _)| !p.is_nan()) {
                let acc = if m { &mut core } else { &mut other };
                acc.0 += p;
                acc.1 += 1;
            }
            Ok((core, other))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut cs, mut cn, mut os, mut on) = (0.0, 0, 0.0, 0);
    for ((a, b), (c, d)) in per_sample {
        cs += a;
        cn += b;
        os += c;
        on += d;
    }
    let core = 100.0 * cs / cn.max(1) as f64;
    let other = 100.0 * os / on.max(1) as f64;
    Ok(Confidence {
        core,
        other,
        gap: other - core,
    })
}
