//! Non-neural reference models with known distributions, for tests and oracles.

use super::{LanguageModel, TokenId};
use crate::error::{Error, Result};

/// Every token equally likely at every position.
#[derive(Clone, Copy, Debug)]
pub struct UniformModel {
    vocab: usize,
    context: usize,
}

impl UniformModel {
    pub fn new(vocab: usize, context: usize) -> Self {
        UniformModel { vocab, context }
    }

    fn dist(&self) -> Vec<f64> {
        vec![-(self.vocab as f64).ln(); self.vocab]
    }
}

impl LanguageModel for UniformModel {
    type Cache = usize;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn context_len(&self) -> usize {
        self.context
    }

    fn target_log_probs(&self, tokens: &[TokenId], start: usize) -> Result<Vec<f64>> {
        check(tokens.len(), start, self.context)?;
        Ok(vec![-(self.vocab as f64).ln(); tokens.len() - start])
    }

    fn start(&self) -> Result<(usize, Vec<f64>)> {
        Ok((1, self.dist()))
    }

    fn feed(&self, pos: &mut usize, _token: TokenId) -> Result<Vec<f64>> {
        *pos += 1;
        if *pos > self.context {
            return Err(Error::ContextOverflow {
                len: *pos,
                context: self.context,
                sample: None,
            });
        }
        Ok(self.dist())
    }
}

type Script = dyn Fn(&[TokenId]) -> Option<TokenId> + Send + Sync;

/// A model whose preferred next token is a function of the whole history.
///
/// The scripted token receives probability `confidence`; the remaining mass is
/// spread evenly over the other tokens. `None` from the script means uniform.
pub struct ScriptedModel {
    vocab: usize,
    context: usize,
    confidence: f64,
    script: Box<Script>,
}

impl ScriptedModel {
    pub fn new<S>(vocab: usize, context: usize, confidence: f64, script: S) -> Self
    where
        S: Fn(&[TokenId]) -> Option<TokenId> + Send + Sync + 'static,
    {
        assert!(confidence > 0.0 && confidence <= 1.0);
        ScriptedModel {
            vocab,
            context,
            confidence,
            script: Box::new(script),
        }
    }

    fn dist(&self, history: &[TokenId]) -> Vec<f64> {
        match (self.script)(history) {
            Some(t) => {
                let rest = ((1.0 - self.confidence) / (self.vocab - 1) as f64).ln();
                let mut lp = vec![rest; self.vocab];
                lp[t as usize] = self.confidence.ln();
                lp
            }
            None => vec![-(self.vocab as f64).ln(); self.vocab],
        }
    }
}

impl LanguageModel for ScriptedModel {
    type Cache = Vec<TokenId>;

    fn vocab_size(&self) -> usize {
        self.vocab
    }

    fn context_len(&self) -> usize {
        self.context
    }

    fn target_log_probs(&self, tokens: &[TokenId], start: usize) -> Result<Vec<f64>> {
        check(tokens.len(), start, self.context)?;
        Ok((start..tokens.len())
            .map(|t| self.dist(&tokens[..t])[tokens[t] as usize])
            .collect())
    }

    fn start(&self) -> Result<(Vec<TokenId>, Vec<f64>)> {
        Ok((Vec::new(), self.dist(&[])))
    }

    fn feed(&self, history: &mut Vec<TokenId>, token: TokenId) -> Result<Vec<f64>> {
        history.push(token);
        if history.len() + 1 > self.context {
            return Err(Error::ContextOverflow {
                len: history.len() + 1,
                context: self.context,
                sample: None,
            });
        }
        Ok(self.dist(history))
    }
}

fn check(len: usize, start: usize, context: usize) -> Result<()> {
    if start >= len {
        return Err(Error::Contract(format!("target start {start} out of range for {len} tokens")));
    }
    if len > context {
        return Err(Error::ContextOverflow {
            len,
            context,
            sample: None,
        });
    }
    Ok(())
}
