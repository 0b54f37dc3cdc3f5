//! Answer extraction and task-specific normalization.

use std::sync::LazyLock;

use regex::Regex;

use super::TaskKind;

/// Spelling of the answer marker in decoded text.
pub const ANSWER_MARKER: &str = "<answer>";

static CHOICE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\(?([a-z])\)?(?:[\s.,:]|$)").unwrap());
static INTEGER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[-+]?\d[\d,]*").unwrap());

fn clean(text: &str) -> String {
    text.trim()
        .to_lowercase()
        .trim_end_matches(|c: char| c.is_whitespace() || ".,!?;:".contains(c))
        .to_string()
}

/// Normalizes an answer string according to the task's rules.
pub fn normalize_answer(text: &str, kind: TaskKind) -> String {
    let base = clean(text);
    match kind {
        TaskKind::ObjectSwap => CHOICE
            .captures(&base)
            .map(|c| c[1].to_string())
            .unwrap_or(base),
        TaskKind::Arithmetic => INTEGER
            .find(&base)
            .and_then(|m| m.as_str().replace(',', "").parse::<i64>().ok())
            .map(|v| v.to_string())
            .unwrap_or(base),
        TaskKind::LastLetter => base
            .chars()
            .filter(|c| !c.is_whitespace() && !"\"'".contains(*c))
            .collect(),
        TaskKind::Imported => base,
    }
}

/// The normalized text after the first answer marker, or `None` when the
/// output never reaches an answer.
pub fn extract_answer(generated: &str, kind: TaskKind) -> Option<String> {
    let at = generated.find(ANSWER_MARKER)?;
    let rest = &generated[at + ANSWER_MARKER.len()..];
    let end = rest.find(['\n', '<']).unwrap_or(rest.len());
    let answer = normalize_answer(&rest[..end], kind);
    (!answer.is_empty()).then_some(answer)
}
