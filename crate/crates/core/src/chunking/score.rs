use crate::error::{Error, Result};
use crate::layout;
use crate::model::{LanguageModel, TokenId, Vocabulary};

/// Loss of a candidate chunk at a given stage. Implementations must be
/// deterministic and safe for concurrent read-only use.
pub trait Scorer: Sync {
    fn score(&self, stage: usize, question: &str, prior: &[String], candidate: &str) -> Result<f64>;

    /// Scores several candidates sharing the same stage and context.
    fn score_many(&self, stage: usize, question: &str, prior: &[String], candidates: &[String]) -> Result<Vec<f64>> {
        candidates
            .iter()
            .map(|c| self.score(stage, question, prior, c))
            .collect()
    }
}

/// `[m] q \n prior.. candidate` together with the index of the candidate's first token.
pub fn stage_sequence(stage: usize, question: &str, prior: &[String], candidate: &str) -> (Vec<TokenId>, usize) {
    let mut tokens = layout::staged_prefix(Some(layout::stage_tag(stage)), question, prior);
    let start = tokens.len();
    Vocabulary.push_text(&mut tokens, candidate);
    (tokens, start)
}

/// Span loss of `candidate` as chunk `stage`, conditioned on the question and
/// the preceding chunks.
pub fn chunk_stage_loss<M: LanguageModel + ?Sized>(
    model: &M,
    question: &str,
    prior: &[String],
    candidate: &str,
    stage: usize,
) -> Result<f64> {
    if candidate.is_empty() {
        return Err(Error::Contract("empty candidate chunk".into()));
    }
    let (tokens, start) = stage_sequence(stage, question, prior, candidate);
    crate::model::span_loss(model, &tokens, start)
}

/// Scores chunks with a student model.
pub struct ModelScorer<'a, M: ?Sized> {
    pub model: &'a M,
}

impl<'a, M: LanguageModel + ?Sized> ModelScorer<'a, M> {
    pub fn new(model: &'a M) -> Self {
        ModelScorer { model }
    }
}

impl<M: LanguageModel + ?Sized> Scorer for ModelScorer<'_, M> {
    fn score(&self, stage: usize, question: &str, prior: &[String], candidate: &str) -> Result<f64> {
        chunk_stage_loss(self.model, question, prior, candidate, stage)
    }

    /// When every candidate is a text prefix of the longest one, a single
    /// forward pass yields all losses.
    fn score_many(&self, stage: usize, question: &str, prior: &[String], candidates: &[String]) -> Result<Vec<f64>> {
        let Some(longest) = candidates.iter().max_by_key(|c| c.len()) else {
            return Ok(Vec::new());
        };
        if candidates.iter().any(|c| c.is_empty() || !longest.starts_with(c.as_str())) {
            return candidates
                .iter()
                .map(|c| self.score(stage, question, prior, c))
                .collect();
        }
        let (tokens, start) = stage_sequence(stage, question, prior, longest);
        let lp = self.model.target_log_probs(&tokens, start)?;
        Ok(candidates
            .iter()
            .map(|c| {
                // Byte-level tokens: the candidate covers exactly its byte length.
                let n = c.len();
                -lp[..n].iter().sum::<f64>() / n as f64
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::UniformModel;
    use crate::model::{ModelConfig, Transformer};

    #[test]
    fn single_token_candidate_under_uniform_model() {
        let m = UniformModel::new(Vocabulary::SIZE, 512);
        let l = chunk_stage_loss(&m, "q?", &["a".into()], "x", 1).unwrap();
        assert!((l - (Vocabulary::SIZE as f64).ln()).abs() < 1e-12);
    }

    fn small_model() -> Transformer<f64> {
        let cfg = ModelConfig {
            vocab_size: Vocabulary::SIZE,
            d_model: 16,
            n_layers: 1,
            n_heads: 2,
            d_ff: 32,
            context: 128,
        };
        Transformer::init(cfg, 3).unwrap()
    }

    #[test]
    fn equals_span_loss_on_an_independent_sequence() {
        let m = small_model();
        let prior = vec!["Al-red, Bo-tan.".to_string()];
        let l = chunk_stage_loss(&m, "Who?", &prior, "Al-tan, Bo-red.", 1).unwrap();
        let mut seq: Vec<TokenId> = vec![crate::model::Control::Stage(1).id()];
        seq.extend("Who?\nAl-red, Bo-tan.\n".bytes().map(TokenId::from));
        let s = seq.len();
        seq.extend("Al-tan, Bo-red.".bytes().map(TokenId::from));
        let direct = crate::model::span_loss(&m, &seq, s).unwrap();
        assert!((l - direct).abs() < 1e-9);
    }

    #[test]
    fn shared_pass_matches_individual_scores() {
        let m = small_model();
        let scorer = ModelScorer::new(&m);
        let prior = vec!["one".to_string()];
        let cands: Vec<String> = vec!["a b".into(), "a b\nc d".into(), "a b\nc d\ne".into()];
        let many = scorer.score_many(1, "q", &prior, &cands).unwrap();
        for (c, l) in cands.iter().zip(&many) {
            let single = scorer.score(1, "q", &prior, c).unwrap();
            assert!((single - l).abs() < 1e-12);
        }
        let unrelated: Vec<String> = vec!["xy".into(), "ab".into()];
        let many = scorer.score_many(0, "q", &[], &unrelated).unwrap();
        assert!((many[1] - scorer.score(0, "q", &[], "ab").unwrap()).abs() < 1e-12);
    }

    #[test]
    fn overflow_is_an_error() {
        let m = small_model();
        let long = "x".repeat(200);
        assert!(matches!(
            chunk_stage_loss(&m, "q", &[], &long, 0),
            Err(Error::ContextOverflow { .. })
        ));
    }
}
