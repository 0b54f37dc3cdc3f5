//! Byte-level vocabulary with reserved control tokens.
//!
//! Ids `0..256` are raw UTF-8 bytes. Control tokens follow: stage tags
//! `[0]`..`[31]`, then `[answer]`, `[skip]`, `[thought]`, `<bos>`, `<eoc>`,
//! `<eos>` and the answer marker `<answer>`.

use sha2::{Digest, Sha256};

pub type TokenId = u32;

pub const BYTE_TOKENS: u32 = 256;
pub const MAX_STAGES: usize = 32;

/// Non-byte tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Control {
    Stage(usize),
    AnswerStage,
    Skip,
    Thought,
    Begin,
    EndOfChunk,
    EndOfSequence,
    AnswerMarker,
}

const FIXED: [Control; 7] = [
    Control::AnswerStage,
    Control::Skip,
    Control::Thought,
    Control::Begin,
    Control::EndOfChunk,
    Control::EndOfSequence,
    Control::AnswerMarker,
];

impl Control {
    pub fn id(self) -> TokenId {
        match self {
            Control::Stage(m) => {
                assert!(m < MAX_STAGES, "stage tag [{m}] exceeds the reserved range");
                BYTE_TOKENS + m as u32
            }
            other => {
                let pos = FIXED.iter().position(|c| *c == other).expect("fixed control");
                BYTE_TOKENS + MAX_STAGES as u32 + pos as u32
            }
        }
    }

    pub fn from_id(id: TokenId) -> Option<Control> {
        let rel = id.checked_sub(BYTE_TOKENS)? as usize;
        if rel < MAX_STAGES {
            Some(Control::Stage(rel))
        } else {
            FIXED.get(rel - MAX_STAGES).copied()
        }
    }

    pub fn spelling(self) -> String {
        match self {
            Control::Stage(m) => format!("[{m}]"),
            Control::AnswerStage => "[answer]".into(),
            Control::Skip => "[skip]".into(),
            Control::Thought => "[thought]".into(),
            Control::Begin => "<bos>".into(),
            Control::EndOfChunk => "<eoc>".into(),
            Control::EndOfSequence => "<eos>".into(),
            Control::AnswerMarker => "<answer>".into(),
        }
    }
}

/// The fixed student vocabulary. Stateless; exists so callers can pass it around
/// and so checkpoints can pin its hash.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary;

impl Vocabulary {
    pub const SIZE: usize = BYTE_TOKENS as usize + MAX_STAGES + FIXED.len();

    pub fn size(&self) -> usize {
        Self::SIZE
    }

    /// Plain text to byte tokens. Control spellings are NOT interpreted.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        text.bytes().map(TokenId::from).collect()
    }

    pub fn push_text(&self, out: &mut Vec<TokenId>, text: &str) {
        out.extend(text.bytes().map(TokenId::from));
    }

    pub fn is_control(&self, id: TokenId) -> bool {
        id >= BYTE_TOKENS
    }

    /// Tokens to text; control tokens render as their spellings.
    pub fn decode(&self, tokens: &[TokenId]) -> String {
        let mut out = String::new();
        let mut bytes = Vec::new();
        for &t in tokens {
            if t < BYTE_TOKENS {
                bytes.push(t as u8);
                continue;
            }
            out.push_str(&String::from_utf8_lossy(&bytes));
            bytes.clear();
            match Control::from_id(t) {
                Some(c) => out.push_str(&c.spelling()),
                None => out.push('\u{fffd}'),
            }
        }
        out.push_str(&String::from_utf8_lossy(&bytes));
        out
    }

    /// Inverse of [`decode`](Self::decode) for text whose literal content
    /// contains no control spellings.
    pub fn parse(&self, text: &str) -> Vec<TokenId> {
        let mut out = Vec::with_capacity(text.len());
        let mut rest = text;
        'outer: while !rest.is_empty() {
            if rest.starts_with('[') || rest.starts_with('<') {
                for c in FIXED {
                    let sp = c.spelling();
                    if let Some(r) = rest.strip_prefix(sp.as_str()) {
                        out.push(c.id());
                        rest = r;
                        continue 'outer;
                    }
                }
                if let Some(r) = rest.strip_prefix('[') {
                    let digits: String = r.chars().take_while(|c| c.is_ascii_digit()).collect();
                    if !digits.is_empty() && digits.len() <= 2 && r[digits.len()..].starts_with(']') {
                        if let Ok(m) = digits.parse::<usize>() {
                            if m < MAX_STAGES && (digits == "0" || !digits.starts_with('0')) {
                                out.push(Control::Stage(m).id());
                                rest = &r[digits.len() + 1..];
                                continue;
                            }
                        }
                    }
                }
            }
            let ch = rest.chars().next().expect("non-empty");
            let mut buf = [0u8; 4];
            self.push_text(&mut out, ch.encode_utf8(&mut buf));
            rest = &rest[ch.len_utf8()..];
        }
        out
    }

    /// True when `text` contains something `parse` would read as a control token.
    pub fn has_control_spelling(&self, text: &str) -> bool {
        self.parse(text).iter().any(|&t| t >= BYTE_TOKENS)
    }

    /// Stable fingerprint of the token inventory, pinned in checkpoints.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(BYTE_TOKENS.to_le_bytes());
        for id in BYTE_TOKENS..Self::SIZE as u32 {
            h.update(Control::from_id(id).expect("control").spelling().as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..8])
    }
}
