use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::{Sample, TaskKind};
use crate::error::{Error, Result};
use crate::layout;

static EQUATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"-?\d+(?: [-+*/] -?\d+)+ = -?\d+").unwrap());
static LAST_LETTER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^The last letter of .+ is (.+)\.$").unwrap());
static TOGETHER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^Together they make (.+)\.$").unwrap());
static CLAUSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"([^\s,]+)-([^\s,.]+)").unwrap());

fn mark(mask: &mut [bool], offset: usize, start: usize, end: usize) {
    mask[offset + start..offset + end].iter_mut().for_each(|m| *m = true);
}

/// Marks the bytes of the raw rationale that carry the reasoning result:
/// equation spans for arithmetic, the clauses that changed owner after each
/// swap for object swaps, and the extracted letters and their concatenation
/// for last-letter tasks.
pub fn core_char_mask(sample: &Sample) -> Result<Vec<bool>> {
    let rationale = sample.rationale();
    let mut mask = vec![false; rationale.len()];
    let mut offset = 0;
    let mut previous: Vec<(String, String)> = Vec::new();
    for step in &sample.steps {
        let text = step.text.as_str();
        match sample.task_kind {
            TaskKind::Arithmetic => {
                for m in EQUATION.find_iter(text) {
                    mark(&mut mask, offset, m.start(), m.end());
                }
            }
            TaskKind::ObjectSwap => {
                let clauses: Vec<_> = CLAUSE.captures_iter(text).collect();
                let pairs: Vec<(String, String)> =
                    clauses.iter().map(|c| (c[1].to_string(), c[2].to_string())).collect();
                if step.index > 0 {
                    for c in &clauses {
                        let pair = (c[1].to_string(), c[2].to_string());
                        let changed = previous.iter().any(|p| p.0 == pair.0 && p.1 != pair.1);
                        if changed {
                            let m = c.get(0).unwrap();
                            mark(&mut mask, offset, m.start(), m.end());
                        }
                    }
                }
                previous = pairs;
            }
            TaskKind::LastLetter => {
                for re in [&*LAST_LETTER, &*TOGETHER] {
                    if let Some(c) = re.captures(text) {
                        let g = c.get(1).unwrap();
                        mark(&mut mask, offset, g.start(), g.end());
                    }
                }
            }
            TaskKind::Imported => {
                return Err(Error::Contract(format!(
                    "no core-token rules for task kind {}",
                    sample.task_kind.name()
                )))
            }
        }
        offset += text.len() + 1;
    }
    Ok(mask)
}

/// Loss weights over the full-rationale target: `weight` on core tokens, 1.0 elsewhere.
pub fn core_token_mask(sample: &Sample, weight: f64) -> Result<Vec<f64>> {
    let chars = core_char_mask(sample)?;
    let tail = 1 + layout::answer_tail(&sample.answer).len();
    Ok(chars
        .iter()
        .map(|&c| if c { weight } else { 1.0 })
        .chain(std::iter::repeat_n(1.0, tail))
        .collect())
}
