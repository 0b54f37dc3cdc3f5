//! The student: byte-level vocabulary, a small causal transformer, and the
//! operations the rest of the pipeline needs from it (span loss, teacher-forced
//! confidences, greedy decoding, training steps, checkpoints).

pub mod checkpoint;
pub mod optim;
pub mod real;
pub mod reference;
pub mod trainer;
pub mod transformer;
pub mod vocab;

pub use optim::{AdamState, LrSchedule, TrainConfig};
pub use real::Real;
pub use trainer::{Student, TrainItem};
pub use transformer::{ModelConfig, Transformer};
pub use vocab::{Control, TokenId, Vocabulary};

use crate::error::{Error, Result};

/// Anything that assigns next-token distributions autoregressively.
///
/// Implementations must be deterministic and safe for concurrent read-only use.
pub trait LanguageModel: Sync {
    type Cache: Send;

    fn vocab_size(&self) -> usize;

    /// Maximum number of positions including the implicit `<bos>`.
    fn context_len(&self) -> usize;

    /// `log p(tokens[t] | tokens[..t])` for every `t` in `start..tokens.len()`.
    fn target_log_probs(&self, tokens: &[TokenId], start: usize) -> Result<Vec<f64>>;

    /// A fresh decoding state plus the distribution of the first token.
    fn start(&self) -> Result<(Self::Cache, Vec<f64>)>;

    /// Appends `token` and returns next-token log-probabilities.
    fn feed(&self, cache: &mut Self::Cache, token: TokenId) -> Result<Vec<f64>>;

    /// A decoding state after `prompt` plus the distribution of the next token.
    fn prefill(&self, prompt: &[TokenId]) -> Result<(Self::Cache, Vec<f64>)> {
        let (mut cache, mut lp) = self.start()?;
        for &t in prompt {
            lp = self.feed(&mut cache, t)?;
        }
        Ok((cache, lp))
    }
}

impl<F: Real> LanguageModel for Transformer<F> {
    type Cache = transformer::DecodeCache<F>;

    fn vocab_size(&self) -> usize {
        self.config().vocab_size
    }

    fn context_len(&self) -> usize {
        self.config().context
    }

    fn target_log_probs(&self, tokens: &[TokenId], start: usize) -> Result<Vec<f64>> {
        Transformer::target_log_probs(self, tokens, start)
    }

    fn start(&self) -> Result<(Self::Cache, Vec<f64>)> {
        let mut cache = self.new_cache();
        let lp = self.step(&mut cache, self.bos())?;
        Ok((cache, lp))
    }

    fn feed(&self, cache: &mut Self::Cache, token: TokenId) -> Result<Vec<f64>> {
        self.step(cache, token)
    }

    fn prefill(&self, prompt: &[TokenId]) -> Result<(Self::Cache, Vec<f64>)> {
        Transformer::prefill(self, prompt)
    }
}

/// Mean cross-entropy of `tokens[s..]` given their prefixes.
pub fn span_loss<M: LanguageModel + ?Sized>(model: &M, tokens: &[TokenId], s: usize) -> Result<f64> {
    if s >= tokens.len() {
        return Err(Error::Contract(format!(
            "target start {s} out of range for {} tokens",
            tokens.len()
        )));
    }
    let lp = model.target_log_probs(tokens, s)?;
    Ok(-lp.iter().sum::<f64>() / lp.len() as f64)
}

/// Teacher-forced probability of each continuation token.
pub fn token_confidences<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    continuation: &[TokenId],
) -> Result<Vec<f64>> {
    let total = prompt.len() + continuation.len();
    if total > model.context_len() {
        return Err(Error::ContextOverflow {
            len: total,
            context: model.context_len(),
            sample: None,
        });
    }
    if continuation.is_empty() {
        return Ok(Vec::new());
    }
    let seq: Vec<TokenId> = prompt.iter().chain(continuation).copied().collect();
    Ok(model
        .target_log_probs(&seq, prompt.len())?
        .into_iter()
        .map(f64::exp)
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    /// A stop token was produced; it is not included in the output.
    StopToken(TokenId),
    /// The generation cap (or the context window) was reached.
    Length,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeResult {
    pub tokens: Vec<TokenId>,
    /// Probability of each emitted token under the model.
    pub probs: Vec<f64>,
    pub stop: StopReason,
}

impl DecodeResult {
    /// Decoder steps taken, counting a terminating stop token.
    pub fn steps(&self) -> usize {
        self.tokens.len() + usize::from(matches!(self.stop, StopReason::StopToken(_)))
    }

    pub fn hit_cap(&self) -> bool {
        self.stop == StopReason::Length
    }
}

fn argmax(lp: &[f64]) -> (TokenId, f64) {
    let mut best = 0;
    for (i, &v) in lp.iter().enumerate() {
        if v > lp[best] {
            best = i;
        }
    }
    (best as TokenId, lp[best])
}

/// Greedy decoding until a stop token or `cap` new tokens.
///
/// The cap is additionally bounded by the context window; running out of
/// context is reported as [`StopReason::Length`].
pub fn greedy_generate<M: LanguageModel + ?Sized>(
    model: &M,
    prompt: &[TokenId],
    stop: &[TokenId],
    cap: usize,
) -> Result<DecodeResult> {
    if prompt.len() >= model.context_len() {
        return Err(Error::ContextOverflow {
            len: prompt.len(),
            context: model.context_len(),
            sample: None,
        });
    }
    let (mut cache, mut lp) = model.prefill(prompt)?;
    let cap = cap.min(model.context_len() - prompt.len());
    let mut tokens = Vec::new();
    let mut probs = Vec::new();
    loop {
        if tokens.len() >= cap {
            return Ok(DecodeResult {
                tokens,
                probs,
                stop: StopReason::Length,
            });
        }
        let (tok, logp) = argmax(&lp);
        if stop.contains(&tok) {
            return Ok(DecodeResult {
                tokens,
                probs,
                stop: StopReason::StopToken(tok),
            });
        }
        tokens.push(tok);
        probs.push(logp.exp());
        if tokens.len() < cap {
            lp = model.feed(&mut cache, tok)?;
        }
    }
}
