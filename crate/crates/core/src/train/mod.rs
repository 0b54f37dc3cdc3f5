//! Training regimes over a shared epoch loop with dev-set early stopping.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chunking::{average_chunk, granular_chunk, search_chunk, ChunkPlan, Granularity, ModelScorer, SearchConfig};
use crate::corpus::{Sample, TaskKind};
use crate::databuild::{
    build_baseline_example, build_cwt_examples, build_skipall_example, build_staged_examples, build_stt_examples,
    build_weighted_example, generate_skip_labels, Decision, LabelMode, SkipLabel, StagePrefix, TrainingExample,
};
use crate::error::{Error, Result};
use crate::eval::{evaluate, DecodeMode, EvalReport};
use crate::model::checkpoint::param_hash;
use crate::model::{LrSchedule, ModelConfig, Student, TrainConfig, Transformer, Vocabulary};
use crate::store::{sha256_hex, write_jsonl, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Baseline,
    CwtAc,
    CwtSbc,
    Stt,
    Skipall,
    SentWise,
    StepWise,
    Weighted,
}

impl Regime {
    pub const ALL: [Regime; 8] = [
        Regime::Baseline,
        Regime::CwtAc,
        Regime::CwtSbc,
        Regime::Stt,
        Regime::Skipall,
        Regime::SentWise,
        Regime::StepWise,
        Regime::Weighted,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Regime::Baseline => "baseline",
            Regime::CwtAc => "cwt_ac",
            Regime::CwtSbc => "cwt_sbc",
            Regime::Stt => "stt",
            Regime::Skipall => "skipall",
            Regime::SentWise => "sent_wise",
            Regime::StepWise => "step_wise",
            Regime::Weighted => "weighted",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown regime `{s}`")))
    }
}

/// Default chunk count per task at desk scale.
pub fn default_chunks(kind: TaskKind) -> usize {
    match kind {
        TaskKind::LastLetter => 3,
        _ => 2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub regime: Regime,
    pub train: TrainConfig,
    pub model: ModelConfig,
    /// Chunk count for average and search-based chunking.
    pub chunks: usize,
    /// Boundary search; present exactly for `cwt_sbc` and `stt`.
    pub search: Option<SearchConfig>,
    /// Epochs without a new best dev accuracy before stopping.
    pub patience: usize,
    /// Cap on skip-label / retrain rounds.
    pub stt_iterations: usize,
    pub label_mode: LabelMode,
    /// Loss weight of core tokens under `weighted`.
    pub core_weight: f64,
    /// Whether sentence- and step-wise regimes tag their stages.
    pub granular_prefix: bool,
}

impl RunConfig {
    /// The desk preset for `regime` on `kind`.
    pub fn desk(regime: Regime, kind: TaskKind, seed: u64) -> Self {
        let chunks = default_chunks(kind);
        RunConfig {
            regime,
            train: TrainConfig::desk(seed),
            model: ModelConfig::desk(Vocabulary::SIZE),
            chunks,
            search: matches!(regime, Regime::CwtSbc | Regime::Stt).then(|| SearchConfig::new(chunks)),
            patience: 10,
            stt_iterations: 2,
            label_mode: LabelMode::Accumulating,
            core_weight: 2.0,
            granular_prefix: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        if self.chunks == 0 {
            return Err(Error::Config("chunk count must be at least 1".into()));
        }
        let needs_search = matches!(self.regime, Regime::CwtSbc | Regime::Stt);
        match (&self.search, needs_search) {
            (Some(s), true) => {
                s.validate()?;
                if s.chunks != self.chunks {
                    return Err(Error::Config(format!(
                        "search chunk count {} differs from run chunk count {}",
                        s.chunks, self.chunks
                    )));
                }
            }
            (None, true) => return Err(Error::Config(format!("regime {} needs a search config", self.regime))),
            (Some(_), false) => {
                return Err(Error::Config(format!("regime {} takes no search config", self.regime)))
            }
            (None, false) => {}
        }
        if self.regime == Regime::Stt && self.stt_iterations == 0 {
            return Err(Error::Config("stt needs at least one iteration".into()));
        }
        if !(self.core_weight.is_finite() && self.core_weight > 0.0) {
            return Err(Error::Config("core weight must be positive".into()));
        }
        Ok(())
    }

    /// The decoding protocol a model trained under this config is evaluated with.
    pub fn decode_mode(&self) -> DecodeMode {
        match self.regime {
            Regime::Baseline | Regime::Weighted => DecodeMode::Full,
            Regime::CwtAc | Regime::CwtSbc => DecodeMode::Staged { chunks: self.chunks },
            Regime::Stt | Regime::Skipall => DecodeMode::Skip,
            Regime::SentWise | Regime::StepWise => DecodeMode::Open {
                prefix: self.granular_prefix(),
            },
        }
    }

    fn granular_prefix(&self) -> StagePrefix {
        if self.granular_prefix {
            StagePrefix::Counted
        } else {
            StagePrefix::Untagged
        }
    }

    /// Rejects evaluating a model under a protocol it was not trained for.
    pub fn check_mode(&self, mode: DecodeMode) -> Result<()> {
        let expected = self.decode_mode();
        let compatible = mode == expected
            || (self.regime == Regime::Stt && matches!(mode, DecodeMode::Staged { chunks } if chunks == self.chunks));
        if compatible {
            Ok(())
        } else {
            Err(Error::ModeMismatch(format!(
                "a {} model decodes with {expected:?}, not {mode:?}",
                self.regime
            )))
        }
    }

    /// Content hash of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

/// Token-level batch size: the number of target tokens in the batch.
pub fn token_batch_size(batch: &[TrainingExample]) -> usize {
    batch.iter().map(TrainingExample::target_len).sum()
}

/// Splits off roughly 10% of `samples` as a dev set, by a hash of id and seed.
pub fn split_dev(samples: &[Sample], seed: u64) -> (Vec<Sample>, Vec<Sample>) {
    samples.iter().cloned().partition(|s| {
        let h = sha256_hex(format!("{seed}:{}", s.id).as_bytes());
        !u64::from_str_radix(&h[..8], 16).expect("hex digest").is_multiple_of(10)
    })
}

/// Hash of a set of chunk plans (boundaries in sample order).
pub fn plan_hash(plans: &[ChunkPlan]) -> String {
    let flat: Vec<(&str, &[usize])> = plans.iter().map(|p| (p.sample_id.as_str(), p.boundaries.as_slice())).collect();
    sha256_hex(&serde_json::to_vec(&flat).expect("plans serialize"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub iteration: usize,
    pub epoch: usize,
    pub mean_loss: f64,
    /// Mean token-level batch size over the epoch's batches.
    pub token_batch: f64,
    pub steps: u64,
    pub dev_accuracy: f64,
    pub dev_mean_tokens: f64,
    pub plan_hash: Option<String>,
}

/// One skip-label / retrain round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SttIteration {
    pub iteration: usize,
    pub label_model_hash: String,
    pub init_hash: String,
    /// Fraction of chunks labelled internalizable.
    pub internalized: f64,
    /// Fraction of chunk decisions that changed since the previous round.
    pub churn: Option<f64>,
    pub best_accuracy: f64,
    pub best_mean_tokens: f64,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub regime: Regime,
    pub config_hash: String,
    pub epochs: Vec<EpochRecord>,
    pub iterations: Vec<SttIteration>,
    pub best_iteration: usize,
    pub best_epoch: usize,
    pub best_accuracy: f64,
    pub best_mean_tokens: f64,
    /// Parameter hash of the best checkpoint.
    pub best_hash: String,
    pub stopped_early: bool,
}

impl RunRecord {
    fn new(cfg: &RunConfig) -> Self {
        RunRecord {
            regime: cfg.regime,
            config_hash: cfg.hash(),
            epochs: Vec::new(),
            iterations: Vec::new(),
            best_iteration: 0,
            best_epoch: 0,
            best_accuracy: f64::NEG_INFINITY,
            best_mean_tokens: f64::INFINITY,
            best_hash: String::new(),
            stopped_early: false,
        }
    }

    /// The record as `{iteration, epoch, metric, value}` events.
    pub fn events(&self) -> Vec<RunEvent> {
        let mut out = Vec::new();
        for e in &self.epochs {
            for (metric, value) in [
                ("mean_loss", e.mean_loss),
                ("token_batch", e.token_batch),
                ("steps", e.steps as f64),
                ("dev_accuracy", e.dev_accuracy),
                ("dev_mean_tokens", e.dev_mean_tokens),
            ] {
                out.push(RunEvent {
                    iteration: e.iteration,
                    epoch: e.epoch,
                    metric: metric.to_string(),
                    value: serde_json::json!(value),
                });
            }
            if let Some(h) = &e.plan_hash {
                out.push(RunEvent {
                    iteration: e.iteration,
                    epoch: e.epoch,
                    metric: "plan_hash".into(),
                    value: serde_json::json!(h),
                });
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunEvent {
    pub iteration: usize,
    pub epoch: usize,
    pub metric: String,
    pub value: serde_json::Value,
}

/// Writes the event log followed by a `{"summary": ..}` line.
pub fn save_run_record(record: &RunRecord, path: &Path, header: Option<&Provenance>) -> Result<()> {
    let mut lines: Vec<serde_json::Value> = record
        .events()
        .iter()
        .map(serde_json::to_value)
        .collect::<std::result::Result<_, _>>()?;
    lines.push(serde_json::json!({ "summary": record }));
    write_jsonl(path, &lines, header)
}

/// Reads the summary line back from an event log.
pub fn load_run_record(path: &Path) -> Result<RunRecord> {
    let (_, lines) = crate::store::read_lines(path)?;
    for (line, v) in lines.into_iter().rev() {
        if let Some(s) = v.get("summary") {
            return serde_json::from_value(s.clone()).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line,
                field: "summary".into(),
                message: e.to_string(),
            });
        }
    }
    Err(Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        field: "summary".into(),
        message: "no summary record".into(),
    })
}

/// A finished run: its record, the best and last models, and the dev report of the best model.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub record: RunRecord,
    pub best: Transformer<f32>,
    pub last: Student,
    pub dev_report: EvalReport,
    /// Final chunk plans, for chunk-wise regimes.
    pub plans: Option<Vec<ChunkPlan>>,
    /// Skip labels the best STT model was trained on.
    pub labels: Option<Vec<SkipLabel>>,
}

struct Best {
    model: Transformer<f32>,
    report: EvalReport,
    epoch: usize,
}

fn diverged(record: &RunRecord, source: Error) -> Error {
    Error::Diverged {
        record: Box::new(record.clone()),
        source: Box::new(source),
    }
}

/// Trains `student` epoch by epoch until early stopping or the epoch budget.
///
/// `rebuild` is called before every epoch with the current model and returns
/// that epoch's examples and, for chunk-wise regimes, the plan hash.
fn epoch_loop(
    cfg: &RunConfig,
    iteration: usize,
    student: &mut Student,
    dev: &[Sample],
    mode: DecodeMode,
    record: &mut RunRecord,
    mut rebuild: impl FnMut(usize, &Transformer<f32>) -> Result<(Vec<TrainingExample>, Option<String>)>,
) -> Result<Best> {
    let tc = &cfg.train;
    let mut best: Option<Best> = None;
    let mut stale = 0;
    for epoch in 0..tc.epochs {
        let (examples, plan_hash) = rebuild(epoch, &student.model)?;
        if examples.is_empty() {
            return Err(Error::Contract("no training examples".into()));
        }
        let steps_per_epoch = examples.len().div_ceil(tc.batch_size);
        let sched = LrSchedule {
            peak: tc.learning_rate,
            warmup: tc.warmup_steps,
            cycle: tc.cycle_steps.unwrap_or(steps_per_epoch),
            min_ratio: tc.min_lr_ratio,
        };
        let mut order: Vec<usize> = (0..examples.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
        rng.set_stream(((iteration as u64) << 32) | epoch as u64);
        order.shuffle(&mut rng);
        let (mut loss_sum, mut tokens) = (0.0, 0usize);
        for idx in order.chunks(tc.batch_size) {
            let batch: Vec<_> = idx.iter().map(|&i| examples[i].as_item()).collect();
            tokens += idx.iter().map(|&i| examples[i].target_len()).sum::<usize>();
            let lr = sched.at(student.step_count() as usize);
            loss_sum += student.train_step(&batch, lr, tc).map_err(|e| diverged(record, e))?;
        }
        let report = evaluate(&student.model, dev, mode)?;
        log::info!(
            "{} it{iteration} epoch {epoch}: loss {:.4} dev acc {:.3} tokens {:.1}",
            cfg.regime,
            loss_sum / steps_per_epoch as f64,
            report.accuracy,
            report.mean_tokens
        );
        record.epochs.push(EpochRecord {
            iteration,
            epoch,
            mean_loss: loss_sum / steps_per_epoch as f64,
            token_batch: tokens as f64 / steps_per_epoch as f64,
            steps: student.step_count(),
            dev_accuracy: report.accuracy,
            dev_mean_tokens: report.mean_tokens,
            plan_hash,
        });
        if best.as_ref().is_none_or(|b| report.accuracy > b.report.accuracy) {
            best = Some(Best {
                model: student.model.clone(),
                report,
                epoch,
            });
            stale = 0;
        } else {
            stale += 1;
        }
        if stale >= cfg.patience {
            record.stopped_early = epoch + 1 < tc.epochs;
            break;
        }
    }
    Ok(best.expect("at least one epoch"))
}

fn finish(
    mut record: RunRecord,
    best: Best,
    last: Student,
    plans: Option<Vec<ChunkPlan>>,
    labels: Option<Vec<SkipLabel>>,
) -> RunOutcome {
    record.best_epoch = best.epoch;
    record.best_accuracy = best.report.accuracy;
    record.best_mean_tokens = best.report.mean_tokens;
    record.best_hash = param_hash(best.model.params());
    RunOutcome {
        record,
        best: best.model,
        last,
        dev_report: best.report,
        plans,
        labels,
    }
}

fn check_data(train: &[Sample], dev: &[Sample]) -> Result<()> {
    if train.is_empty() || dev.is_empty() {
        return Err(Error::Config("training and dev sets must be non-empty".into()));
    }
    Ok(())
}

fn collect_examples<F>(train: &[Sample], f: F) -> Result<Vec<TrainingExample>>
where
    F: Fn(usize, &Sample) -> Result<Vec<TrainingExample>> + Sync,
{
    let per: Vec<Vec<TrainingExample>> = train
        .par_iter()
        .enumerate()
        .map(|(i, s)| f(i, s))
        .collect::<Result<_>>()?;
    Ok(per.into_iter().flatten().collect())
}

fn fixed_examples(
    cfg: &RunConfig,
    train: &[Sample],
    dev: &[Sample],
    examples: Vec<TrainingExample>,
    plans: Option<Vec<ChunkPlan>>,
) -> Result<RunOutcome> {
    let mut record = RunRecord::new(cfg);
    let mut student = Student::new(cfg.model, cfg.train.seed)?;
    let hash = plans.as_deref().map(plan_hash);
    check_data(train, dev)?;
    let best = epoch_loop(cfg, 0, &mut student, dev, cfg.decode_mode(), &mut record, |_, _| {
        Ok((examples.clone(), hash.clone()))
    })?;
    Ok(finish(record, best, student, plans, None))
}

/// Full-rationale fine-tuning.
pub fn run_baseline(cfg: &RunConfig, train: &[Sample], dev: &[Sample]) -> Result<RunOutcome> {
    cfg.validate()?;
    if cfg.regime != Regime::Baseline {
        return Err(Error::Config(format!("run_baseline called for {}", cfg.regime)));
    }
    let examples = collect_examples(train, |_, s| Ok(vec![build_baseline_example(s)?]))?;
    fixed_examples(cfg, train, dev, examples, None)
}

/// Average chunking of every sample into `chunks` chunks.
pub fn average_plans(train: &[Sample], chunks: usize) -> Result<Vec<ChunkPlan>> {
    train.iter().map(|s| average_chunk(&s.id, s.steps.len(), chunks)).collect()
}

/// One boundary-search pass over every sample with `model` as scorer.
pub fn search_plans(
    model: &Transformer<f32>,
    train: &[Sample],
    plans: &[ChunkPlan],
    search: &SearchConfig,
) -> Result<Vec<ChunkPlan>> {
    let scorer = ModelScorer::new(model);
    train
        .par_iter()
        .zip(plans)
        .map(|(s, p)| search_chunk(p, s, &scorer, search))
        .collect()
}

/// Chunk-wise training: average plans fixed (`cwt_ac`) or re-searched
/// before every epoch with the current model (`cwt_sbc`).
pub fn run_cwt(cfg: &RunConfig, train: &[Sample], dev: &[Sample]) -> Result<RunOutcome> {
    cfg.validate()?;
    check_data(train, dev)?;
    let mut plans = average_plans(train, cfg.chunks)?;
    match cfg.regime {
        Regime::CwtAc => {
            let examples = collect_examples(train, |i, s| build_cwt_examples(s, &plans[i]))?;
            fixed_examples(cfg, train, dev, examples, Some(plans))
        }
        Regime::CwtSbc => {
            let search = cfg.search.expect("validated");
            let mut record = RunRecord::new(cfg);
            let mut student = Student::new(cfg.model, cfg.train.seed)?;
            let best = epoch_loop(cfg, 0, &mut student, dev, cfg.decode_mode(), &mut record, |epoch, model| {
                let mut s = search;
                if let Some(a) = s.anneal.as_mut() {
                    a.seed = a.seed.wrapping_add(epoch as u64);
                }
                plans = search_plans(model, train, &plans, &s)?;
                let examples = collect_examples(train, |i, smp| build_cwt_examples(smp, &plans[i]))?;
                Ok((examples, Some(plan_hash(&plans))))
            })?;
            Ok(finish(record, best, student, Some(plans), None))
        }
        r => Err(Error::Config(format!("run_cwt called for {r}"))),
    }
}

fn label_all(
    model: &Transformer<f32>,
    train: &[Sample],
    plans: &[ChunkPlan],
    mode: LabelMode,
    iteration: usize,
) -> Result<Vec<SkipLabel>> {
    train
        .par_iter()
        .zip(plans)
        .map(|(s, p)| generate_skip_labels(model, s, p, mode, iteration))
        .collect()
}

fn decisions(labels: &[SkipLabel]) -> impl Iterator<Item = &Decision> {
    labels.iter().flat_map(|l| &l.decisions)
}

/// Skip-thinking training on top of a finished chunk-wise run.
///
/// Each round labels every chunk with the current best model, re-initializes
/// the student from the seed's pristine parameters and retrains on the skip
/// and chunk-wise examples. Rounds stop once dev accuracy (ties broken toward
/// fewer generated tokens) stops improving.
pub fn run_stt(
    cfg: &RunConfig,
    train: &[Sample],
    dev: &[Sample],
    source: &Transformer<f32>,
    plans: Vec<ChunkPlan>,
) -> Result<RunOutcome> {
    cfg.validate()?;
    check_data(train, dev)?;
    if cfg.regime != Regime::Stt {
        return Err(Error::Config(format!("run_stt called for {}", cfg.regime)));
    }
    if plans.len() != train.len() {
        return Err(Error::Contract("one chunk plan per training sample required".into()));
    }
    let pristine_hash = param_hash(Transformer::<f32>::init(cfg.model, cfg.train.seed)?.params());
    let mut record = RunRecord::new(cfg);
    let mut label_model = source.clone();
    let mut previous: Option<Vec<SkipLabel>> = None;
    let mut best: Option<(Best, Student, Vec<SkipLabel>)> = None;
    for iteration in 0..cfg.stt_iterations {
        let labels = label_all(&label_model, train, &plans, cfg.label_mode, iteration)?;
        let total = decisions(&labels).count().max(1) as f64;
        let internalized = decisions(&labels).filter(|d| **d == Decision::Internalize).count() as f64 / total;
        let churn = previous
            .as_ref()
            .map(|p| decisions(p).zip(decisions(&labels)).filter(|(a, b)| a != b).count() as f64 / total);
        let mut student = Student::new(cfg.model, cfg.train.seed)?;
        let init_hash = param_hash(student.model.params());
        if init_hash != pristine_hash {
            return Err(Error::Contract("STT student is not at its pristine initialization".into()));
        }
        let examples = collect_examples(train, |i, s| build_stt_examples(s, &plans[i], &labels[i]))?;
        let hash = plan_hash(&plans);
        let round = epoch_loop(cfg, iteration, &mut student, dev, DecodeMode::Skip, &mut record, |_, _| {
            Ok((examples.clone(), Some(hash.clone())))
        })?;
        let (acc, toks) = (round.report.accuracy, round.report.mean_tokens);
        let accepted = best
            .as_ref()
            .is_none_or(|(b, _, _)| acc > b.report.accuracy || (acc == b.report.accuracy && toks < b.report.mean_tokens));
        record.iterations.push(SttIteration {
            iteration,
            label_model_hash: param_hash(label_model.params()),
            init_hash,
            internalized,
            churn,
            best_accuracy: acc,
            best_mean_tokens: toks,
            accepted,
        });
        log::info!("stt round {iteration}: internalized {internalized:.3} acc {acc:.3} tokens {toks:.1}");
        if !accepted {
            break;
        }
        label_model = round.model.clone();
        record.best_iteration = iteration;
        best = Some((round, student, labels.clone()));
        previous = Some(labels);
    }
    let (b, last, labels) = best.expect("first round is always accepted");
    Ok(finish(record, b, last, Some(plans), Some(labels)))
}

/// Sentence- and step-wise chunking, skip-all and core-weighted variants.
pub fn run_variant(cfg: &RunConfig, train: &[Sample], dev: &[Sample]) -> Result<RunOutcome> {
    cfg.validate()?;
    check_data(train, dev)?;
    match cfg.regime {
        Regime::SentWise | Regime::StepWise => {
            let g = if cfg.regime == Regime::SentWise {
                Granularity::Sentence
            } else {
                Granularity::Step
            };
            let plans: Vec<ChunkPlan> = train.iter().map(|s| granular_chunk(s, g)).collect::<Result<_>>()?;
            let prefix = cfg.granular_prefix();
            let examples = collect_examples(train, |i, s| build_staged_examples(s, &plans[i], prefix))?;
            fixed_examples(cfg, train, dev, examples, Some(plans))
        }
        Regime::Weighted => {
            let examples = collect_examples(train, |_, s| Ok(vec![build_weighted_example(s, cfg.core_weight)?]))?;
            fixed_examples(cfg, train, dev, examples, None)
        }
        Regime::Skipall => {
            let plans = average_plans(train, cfg.chunks)?;
            let examples = collect_examples(train, |i, s| {
                let mut v = vec![build_skipall_example(s)?];
                v.extend(build_cwt_examples(s, &plans[i])?);
                Ok(v)
            })?;
            fixed_examples(cfg, train, dev, examples, Some(plans))
        }
        r => Err(Error::Config(format!("run_variant called for {r}"))),
    }
}

/// Runs any regime except `stt`, which needs a chunk-wise source model.
pub fn run(cfg: &RunConfig, train: &[Sample], dev: &[Sample]) -> Result<RunOutcome> {
    match cfg.regime {
        Regime::Baseline => run_baseline(cfg, train, dev),
        Regime::CwtAc | Regime::CwtSbc => run_cwt(cfg, train, dev),
        Regime::Stt => Err(Error::Config("stt needs a chunk-wise source model; use run_stt".into())),
        _ => run_variant(cfg, train, dev),
    }
}
