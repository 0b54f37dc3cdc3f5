//! Greedy decoding protocols for each training regime.

use serde::{Deserialize, Serialize};

use crate::databuild::StagePrefix;
use crate::error::Result;
use crate::layout;
use crate::model::{greedy_generate, Control, LanguageModel, StopReason, TokenId, Vocabulary};

/// Generation cap shared by all stages of one query.
pub const GENERATION_CAP: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DecodeMode {
    /// `q \n` then the whole rationale and answer in one pass.
    Full,
    /// One pass per chunk stage `[0]..[M-1]`, then `[answer]`.
    Staged { chunks: usize },
    /// Stages continue until the model produces an answer.
    Open { prefix: StagePrefix },
    /// `[skip] q \n` in one pass.
    Skip,
}

/// The decoded output of one query.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Generation {
    /// Decoded output of every stage, in order.
    pub stages: Vec<String>,
    /// Decoder steps, counting terminating stop tokens.
    pub tokens: usize,
    pub hit_cap: bool,
    /// Model probability of every emitted token.
    pub probs: Vec<f64>,
}

impl Generation {
    /// All stage outputs joined by newlines.
    pub fn text(&self) -> String {
        self.stages.join("\n")
    }

    fn push(&mut self, tokens: &[TokenId], probs: &[f64], steps: usize) {
        self.stages.push(Vocabulary.decode(tokens));
        self.tokens += steps;
        self.probs.extend_from_slice(probs);
    }
}

/// Runs one stage; returns the stop reason, or `None` when the budget or the
/// context is exhausted before the stage could start.
fn stage<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    stop: &[TokenId],
    cap: usize,
    out: &mut Generation,
) -> Result<Option<(StopReason, Vec<TokenId>)>> {
    let budget = cap.saturating_sub(out.tokens);
    if budget == 0 || prompt.len() >= model.context_len() {
        out.hit_cap = true;
        return Ok(None);
    }
    let r = greedy_generate(model, prompt, stop, budget)?;
    out.push(&r.tokens, &r.probs, r.steps());
    if r.hit_cap() {
        out.hit_cap = true;
    }
    Ok(Some((r.stop, r.tokens)))
}

/// Rolls a chunk-wise model forward from stage `from`, given the chunks
/// already in context, through the answer stage.
pub fn staged_rollout<M: LanguageModel + ?Sized>(
    model: &M,
    question: &str,
    mut prior: Vec<String>,
    from: usize,
    chunks: usize,
    cap: usize,
) -> Result<Generation> {
    let mut out = Generation::default();
    let stops = [layout::eoc(), layout::eos()];
    for m in from..chunks {
        let prompt = layout::staged_prefix(StagePrefix::Fixed.tag(m, chunks)?, question, &prior);
        match stage(model, &prompt, &stops, cap, &mut out)? {
            Some((StopReason::StopToken(_), toks)) => prior.push(Vocabulary.decode(&toks)),
            _ => return Ok(out),
        }
    }
    let prompt = layout::staged_prefix(Some(Control::AnswerStage), question, &prior);
    stage(model, &prompt, &[layout::eos()], cap, &mut out)?;
    Ok(out)
}

fn open_rollout<M: LanguageModel + ?Sized>(
    model: &M,
    question: &str,
    prefix: StagePrefix,
    cap: usize,
) -> Result<Generation> {
    let mut out = Generation::default();
    let mut prior: Vec<String> = Vec::new();
    let stops = [layout::eoc(), layout::eos()];
    for m in 0.. {
        let Ok(tag) = prefix.tag(m, usize::MAX) else {
            out.hit_cap = true;
            break;
        };
        let prompt = layout::staged_prefix(tag, question, &prior);
        match stage(model, &prompt, &stops, cap, &mut out)? {
            Some((StopReason::StopToken(t), toks)) if t == layout::eoc() && !toks.contains(&layout::answer_marker()) => {
                prior.push(Vocabulary.decode(&toks));
            }
            _ => break,
        }
    }
    Ok(out)
}

/// Generates an answer for `question` under the given protocol.
pub fn generate<M: LanguageModel + ?Sized>(
    model: &M,
    question: &str,
    mode: DecodeMode,
    cap: usize,
) -> Result<Generation> {
    match mode {
        DecodeMode::Full | DecodeMode::Skip => {
            let tag = (mode == DecodeMode::Skip).then_some(Control::Skip);
            let prompt = layout::staged_prefix(tag, question, &[]);
            let mut out = Generation::default();
            stage(model, &prompt, &[layout::eos()], cap, &mut out)?;
            Ok(out)
        }
        DecodeMode::Staged { chunks } => staged_rollout(model, question, Vec::new(), 0, chunks, cap),
        DecodeMode::Open { prefix } => open_rollout(model, question, prefix, cap),
    }
}
