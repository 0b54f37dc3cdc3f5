use std::path::Path;

use serde::{Deserialize, Serialize};

use super::mask::core_token_mask;
use super::skip::{Decision, SkipLabel};
use crate::chunking::ChunkPlan;
use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::layout;
use crate::model::{Control, TokenId, TrainItem, Vocabulary};
use crate::store::{self, Provenance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleKind {
    BaselineFull,
    CwtStage,
    CwtAnswer,
    SttSkip,
    Skipall,
}

/// One tokenized training sequence with its first target index.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingExample {
    pub sample_id: String,
    pub kind: ExampleKind,
    /// Chunk stage for stage examples.
    pub stage: Option<usize>,
    pub tokens: Vec<TokenId>,
    pub start: usize,
    /// Per-target weights (`tokens.len() - start` entries); `None` means all 1.0.
    pub weights: Option<Vec<f64>>,
    pub labels: Option<Vec<Decision>>,
}

impl TrainingExample {
    fn new(sample_id: &str, kind: ExampleKind, stage: Option<usize>, prefix: Vec<TokenId>, target: Vec<TokenId>) -> Self {
        let start = prefix.len();
        let mut tokens = prefix;
        tokens.extend(target);
        TrainingExample {
            sample_id: sample_id.to_string(),
            kind,
            stage,
            tokens,
            start,
            weights: None,
            labels: None,
        }
    }

    /// Number of loss-bearing tokens, `K - s`.
    pub fn target_len(&self) -> usize {
        self.tokens.len() - self.start
    }

    pub fn prefix(&self) -> &[TokenId] {
        &self.tokens[..self.start]
    }

    pub fn target(&self) -> &[TokenId] {
        &self.tokens[self.start..]
    }

    pub fn as_item(&self) -> TrainItem<'_> {
        TrainItem {
            id: &self.sample_id,
            tokens: &self.tokens,
            start: self.start,
            weights: self.weights.as_deref(),
        }
    }
}

/// Sum of target lengths over a set of examples.
pub fn token_total(examples: &[TrainingExample]) -> usize {
    examples.iter().map(TrainingExample::target_len).sum()
}

/// Rejects samples whose text would be ambiguous once tokenized.
pub fn check_sample(sample: &Sample) -> Result<()> {
    sample.validate()?;
    let v = Vocabulary;
    let texts = std::iter::once(sample.question.as_str())
        .chain(std::iter::once(sample.answer.as_str()))
        .chain(sample.steps.iter().map(|s| s.text.as_str()));
    for t in texts {
        if v.has_control_spelling(t) {
            return Err(Error::Contract(format!(
                "sample {} contains a control-token spelling",
                sample.id
            )));
        }
    }
    Ok(())
}

/// `q \n | r \n <answer> a <eos>`
pub fn build_baseline_example(sample: &Sample) -> Result<TrainingExample> {
    check_sample(sample)?;
    Ok(TrainingExample::new(
        &sample.id,
        ExampleKind::BaselineFull,
        None,
        layout::question(&sample.question),
        layout::rationale_target(&sample.rationale(), &sample.answer),
    ))
}

/// The baseline example with core tokens weighted by `weight`.
pub fn build_weighted_example(sample: &Sample, weight: f64) -> Result<TrainingExample> {
    let mut ex = build_baseline_example(sample)?;
    ex.weights = Some(core_token_mask(sample, weight)?);
    Ok(ex)
}

/// How stage examples are tagged.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StagePrefix {
    /// `[m]` per chunk stage and `[answer]` for the answer example.
    Fixed,
    /// `[m]` per chunk stage and `[M]` for the answer example, for plans whose
    /// chunk count varies by sample.
    Counted,
    /// No tags at all.
    Untagged,
}

impl StagePrefix {
    /// Tag of stage `m` (0-based) in a plan with `chunks` chunks; `m == chunks`
    /// is the answer stage.
    pub fn tag(self, m: usize, chunks: usize) -> Result<Option<Control>> {
        let tag = match self {
            StagePrefix::Fixed if m == chunks => Some(Control::AnswerStage),
            StagePrefix::Fixed | StagePrefix::Counted => Some(Control::Stage(m)),
            StagePrefix::Untagged => None,
        };
        if let Some(Control::Stage(k)) = tag {
            if k >= crate::model::vocab::MAX_STAGES {
                return Err(Error::Contract(format!("stage {k} exceeds the reserved stage tags")));
            }
        }
        Ok(tag)
    }
}

/// Stage examples `[m] q c_0 .. | c_m <eoc>` for every chunk plus the answer
/// example `[answer] q c_0 .. c_{M-1} | <answer> a <eos>`.
pub fn build_cwt_examples(sample: &Sample, plan: &ChunkPlan) -> Result<Vec<TrainingExample>> {
    build_staged_examples(sample, plan, StagePrefix::Fixed)
}

pub fn build_staged_examples(sample: &Sample, plan: &ChunkPlan, prefix: StagePrefix) -> Result<Vec<TrainingExample>> {
    check_sample(sample)?;
    let chunks = plan.chunk_texts(sample)?;
    let n = chunks.len();
    let mut out = Vec::with_capacity(n + 1);
    for m in 0..n {
        out.push(TrainingExample::new(
            &sample.id,
            ExampleKind::CwtStage,
            Some(m),
            layout::staged_prefix(prefix.tag(m, n)?, &sample.question, &chunks[..m]),
            layout::chunk_target(&chunks[m]),
        ));
    }
    out.push(TrainingExample::new(
        &sample.id,
        ExampleKind::CwtAnswer,
        None,
        layout::staged_prefix(prefix.tag(n, n)?, &sample.question, &chunks),
        layout::answer_tail(&sample.answer),
    ));
    Ok(out)
}

/// The skip example `[skip] q | (c_j \n | [thought])* <answer> a <eos>`,
/// followed by the sample's chunk-wise examples.
pub fn build_stt_examples(sample: &Sample, plan: &ChunkPlan, labels: &SkipLabel) -> Result<Vec<TrainingExample>> {
    check_sample(sample)?;
    let chunks = plan.chunk_texts(sample)?;
    if labels.sample_id != sample.id || labels.decisions.len() != chunks.len() {
        return Err(Error::Contract(format!(
            "skip labels for {} do not cover the plan of {}",
            labels.sample_id, sample.id
        )));
    }
    let mut target = Vec::new();
    for (c, d) in chunks.iter().zip(&labels.decisions) {
        match d {
            Decision::Externalize => {
                Vocabulary.push_text(&mut target, c);
                target.push(b'\n' as TokenId);
            }
            Decision::Internalize => target.push(layout::thought()),
        }
    }
    target.extend(layout::answer_tail(&sample.answer));
    let mut skip = TrainingExample::new(
        &sample.id,
        ExampleKind::SttSkip,
        None,
        layout::staged_prefix(Some(Control::Skip), &sample.question, &[]),
        target,
    );
    skip.labels = Some(labels.decisions.clone());
    let mut out = vec![skip];
    out.extend(build_cwt_examples(sample, plan)?);
    Ok(out)
}

/// `[skip] q | <answer> a <eos>`
pub fn build_skipall_example(sample: &Sample) -> Result<TrainingExample> {
    check_sample(sample)?;
    Ok(TrainingExample::new(
        &sample.id,
        ExampleKind::Skipall,
        None,
        layout::staged_prefix(Some(Control::Skip), &sample.question, &[]),
        layout::answer_tail(&sample.answer),
    ))
}

/// On-disk form of a [`TrainingExample`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub sample_id: String,
    pub kind: ExampleKind,
    pub stage: Option<usize>,
    pub s: usize,
    /// Decoded token sequence; control tokens appear as their spellings.
    pub text: String,
    /// `(target offset, weight)` for weights different from 1.0.
    pub weights: Vec<(usize, f64)>,
    pub labels: Option<Vec<Decision>>,
}

impl From<&TrainingExample> for ExampleRecord {
    fn from(e: &TrainingExample) -> Self {
        let weights = e
            .weights
            .iter()
            .flatten()
            .enumerate()
            .filter(|(_, &w)| w != 1.0)
            .map(|(i, &w)| (i, w))
            .collect();
        ExampleRecord {
            sample_id: e.sample_id.clone(),
            kind: e.kind,
            stage: e.stage,
            s: e.start,
            text: Vocabulary.decode(&e.tokens),
            weights,
            labels: e.labels.clone(),
        }
    }
}

impl ExampleRecord {
    pub fn example(&self) -> Result<TrainingExample> {
        let tokens = Vocabulary.parse(&self.text);
        if self.s >= tokens.len() {
            return Err(Error::Contract(format!(
                "example for {}: target start {} beyond {} tokens",
                self.sample_id,
                self.s,
                tokens.len()
            )));
        }
        let n = tokens.len() - self.s;
        let weights = if self.weights.is_empty() {
            None
        } else {
            let mut w = vec![1.0; n];
            for &(i, x) in &self.weights {
                *w.get_mut(i).ok_or_else(|| {
                    Error::Contract(format!("example for {}: weight offset {i} out of range", self.sample_id))
                })? = x;
            }
            Some(w)
        };
        Ok(TrainingExample {
            sample_id: self.sample_id.clone(),
            kind: self.kind,
            stage: self.stage,
            tokens,
            start: self.s,
            weights,
            labels: self.labels.clone(),
        })
    }
}

pub fn save_examples(examples: &[TrainingExample], path: &Path, header: Option<&Provenance>) -> Result<()> {
    let recs: Vec<ExampleRecord> = examples.iter().map(ExampleRecord::from).collect();
    store::write_jsonl(path, &recs, header)
}

pub fn load_examples(path: &Path) -> Result<(Option<Provenance>, Vec<TrainingExample>)> {
    let (header, recs) = store::read_jsonl::<ExampleRecord>(path)?;
    let examples = recs.iter().map(ExampleRecord::example).collect::<Result<_>>()?;
    Ok((header, examples))
}
