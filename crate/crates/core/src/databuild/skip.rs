use serde::{Deserialize, Serialize};

use crate::chunking::ChunkPlan;
use crate::corpus::{extract_answer, Sample};
use crate::error::Result;
use crate::eval::decode::{staged_rollout, GENERATION_CAP};
use crate::model::LanguageModel;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Externalize,
    Internalize,
}

/// Whether removals made for earlier chunks stay removed in later probes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    #[default]
    Accumulating,
    Independent,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipLabel {
    pub sample_id: String,
    pub decisions: Vec<Decision>,
    pub iteration: usize,
    pub mode: LabelMode,
}

impl SkipLabel {
    pub fn internalized(&self) -> usize {
        self.decisions.iter().filter(|d| **d == Decision::Internalize).count()
    }
}

/// Probes which chunks the chunk-wise model can do without.
///
/// For chunk `m`, the model starts at stage `m + 1` with only the kept earlier
/// chunks in context and rolls forward through the answer stage. A correct
/// answer marks chunk `m` as internalizable.
pub fn generate_skip_labels<M: LanguageModel + ?Sized>(
    model: &M,
    sample: &Sample,
    plan: &ChunkPlan,
    mode: LabelMode,
    iteration: usize,
) -> Result<SkipLabel> {
    let chunks = plan.chunk_texts(sample)?;
    let n = chunks.len();
    let mut decisions = Vec::with_capacity(n);
    for m in 0..n {
        let prior: Vec<String> = (0..m)
            .filter(|&j| mode == LabelMode::Independent || decisions[j] == Decision::Externalize)
            .map(|j| chunks[j].clone())
            .collect();
        let g = staged_rollout(model, &sample.question, prior, m + 1, n, GENERATION_CAP)?;
        let correct = extract_answer(&g.text(), sample.task_kind).as_deref() == Some(sample.answer.as_str());
        if g.hit_cap && !correct {
            log::debug!("skip probe for {} chunk {m} hit the generation cap", sample.id);
        }
        decisions.push(if correct {
            Decision::Internalize
        } else {
            Decision::Externalize
        });
    }
    Ok(SkipLabel {
        sample_id: sample.id.clone(),
        decisions,
        iteration,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chunking::average_chunk;
    use crate::corpus::arithmetic_sample;
    use crate::corpus::ArithOp;
    use crate::layout;
    use crate::model::reference::ScriptedModel;
    use crate::model::{Control, TokenId, Vocabulary};

    fn sample() -> Sample {
        arithmetic_sample("s", &["A", "B", "C", "D"], 1, &[ArithOp::Add(2), ArithOp::Add(3), ArithOp::Add(4)]).unwrap()
    }

    /// Reproduces the gold chunk of each stage; in the answer stage it answers
    /// correctly only when `needle` is in context.
    fn model(needle: Option<&'static str>) -> ScriptedModel {
        let gold = sample().step_texts().iter().map(|t| t.to_string()).collect::<Vec<_>>();
        ScriptedModel::new(Vocabulary::SIZE, 2048, 1.0, move |h: &[TokenId]| {
            let text = Vocabulary.decode(h);
            let partial = &text[text.rfind('\n').map_or(0, |p| p + 1)..];
            let (target, stop) = if text.starts_with("[answer]") {
                let ok = needle.is_none_or(|n| text.contains(n));
                (if ok { "<answer> 10" } else { "<answer> 99" }.to_string(), Control::EndOfSequence.id())
            } else {
                let stage = match Vocabulary.parse(&text).first().and_then(|&t| Control::from_id(t)) {
                    Some(Control::Stage(k)) => k,
                    _ => return None,
                };
                (gold[stage].clone(), layout::eoc())
            };
            let full = Vocabulary.parse(&target);
            let done = Vocabulary.parse(partial).len();
            Some(full.get(done).copied().unwrap_or(stop))
        })
    }

    #[test]
    fn always_correct_model_internalizes_everything() {
        let s = sample();
        let plan = average_chunk("s", 4, 4).unwrap();
        let l = generate_skip_labels(&model(None), &s, &plan, LabelMode::Accumulating, 0).unwrap();
        assert_eq!(l.decisions, [Decision::Internalize; 4]);
    }

    #[test]
    fn needed_chunk_stays_external() {
        let s = sample();
        let plan = average_chunk("s", 4, 4).unwrap();
        let needle = "3 + 3 = 6.";
        let l = generate_skip_labels(&model(Some(needle)), &s, &plan, LabelMode::Accumulating, 0).unwrap();
        use Decision::*;
        assert_eq!(l.decisions, [Internalize, Externalize, Internalize, Internalize]);
        let l = generate_skip_labels(&model(Some(needle)), &s, &plan, LabelMode::Independent, 0).unwrap();
        assert_eq!(l.decisions, [Internalize, Externalize, Internalize, Internalize]);
        assert_eq!(l.mode, LabelMode::Independent);
    }

    #[test]
    fn labels_are_deterministic() {
        let s = sample();
        let plan = average_chunk("s", 4, 2).unwrap();
        let m = model(Some("1 + 2"));
        let a = generate_skip_labels(&m, &s, &plan, LabelMode::Accumulating, 1).unwrap();
        assert_eq!(a, generate_skip_labels(&m, &s, &plan, LabelMode::Accumulating, 1).unwrap());
    }
}
