//! Token layouts shared by chunk scoring, dataset construction and decoding.
//!
//! Every sequence starts (implicitly) with `<bos>`. Text parts are separated
//! by a newline:
//!
//! * full rationale: `q \n r \n <answer> a <eos>`
//! * chunk stage `m`: `[m] q \n c_0 \n .. c_{m-1} \n | c_m <eoc>`
//! * answer stage: `[answer] q \n c_0 \n .. c_{M-1} \n | <answer> a <eos>`
//! * skip: `[skip] q \n | (c_j \n or [thought])* <answer> a <eos>`
//!
//! where `|` marks the first target position.

use crate::model::{Control, TokenId, Vocabulary};

const V: Vocabulary = Vocabulary;

pub fn eos() -> TokenId {
    Control::EndOfSequence.id()
}

pub fn eoc() -> TokenId {
    Control::EndOfChunk.id()
}

pub fn answer_marker() -> TokenId {
    Control::AnswerMarker.id()
}

pub fn thought() -> TokenId {
    Control::Thought.id()
}

/// `q \n`
pub fn question(q: &str) -> Vec<TokenId> {
    let mut t = V.encode(q);
    t.push(b'\n' as TokenId);
    t
}

/// `<answer> a <eos>`
pub fn answer_tail(answer: &str) -> Vec<TokenId> {
    let mut t = vec![answer_marker()];
    V.push_text(&mut t, &format!(" {answer}"));
    t.push(eos());
    t
}

/// `tag q \n c_0 \n .. c_{k-1} \n` for the given chunks; `tag` may be absent.
pub fn staged_prefix(tag: Option<Control>, q: &str, chunks: &[String]) -> Vec<TokenId> {
    let mut t = Vec::new();
    if let Some(tag) = tag {
        t.push(tag.id());
    }
    t.extend(question(q));
    for c in chunks {
        V.push_text(&mut t, c);
        t.push(b'\n' as TokenId);
    }
    t
}

/// `c <eoc>`
pub fn chunk_target(chunk: &str) -> Vec<TokenId> {
    let mut t = V.encode(chunk);
    t.push(eoc());
    t
}

/// Full-rationale target: `r \n <answer> a <eos>`.
pub fn rationale_target(rationale: &str, answer: &str) -> Vec<TokenId> {
    let mut t = V.encode(rationale);
    t.push(b'\n' as TokenId);
    t.extend(answer_tail(answer));
    t
}

/// The stage tag of chunk `m`, or the answer tag.
pub fn stage_tag(m: usize) -> Control {
    Control::Stage(m)
}
