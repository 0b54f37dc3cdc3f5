//! Samples, rationale steps, synthetic task generators and dataset files.

mod answer;
mod generators;
mod io;

use serde::{Deserialize, Serialize};

pub use answer::{extract_answer, normalize_answer, ANSWER_MARKER};
pub use generators::{
    arithmetic_sample, gen_arithmetic, gen_last_letter, gen_object_swap, generate, generate_one,
    last_letter_sample, object_swap_sample, ArithOp, Swap,
};
pub use io::{load_dataset, load_dataset_with_header, save_dataset, SampleRecord};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ObjectSwap,
    LastLetter,
    Arithmetic,
    Imported,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ObjectSwap => "object_swap",
            TaskKind::LastLetter => "last_letter",
            TaskKind::Arithmetic => "arithmetic",
            TaskKind::Imported => "imported",
        }
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "object_swap" => Ok(TaskKind::ObjectSwap),
            "last_letter" => Ok(TaskKind::LastLetter),
            "arithmetic" => Ok(TaskKind::Arithmetic),
            "imported" => Ok(TaskKind::Imported),
            other => Err(Error::Config(format!("unknown task kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReasoningStep {
    pub text: String,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub question: String,
    /// Normalized gold answer.
    pub answer: String,
    pub steps: Vec<ReasoningStep>,
    pub task_kind: TaskKind,
}

impl Sample {
    /// The raw rationale: steps joined by newlines.
    pub fn rationale(&self) -> String {
        self.step_texts().join("\n")
    }

    pub fn step_texts(&self) -> Vec<&str> {
        self.steps.iter().map(|s| s.text.as_str()).collect()
    }

    /// Checks the structural invariants of a sample.
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::EmptyRationale);
        }
        for (i, s) in self.steps.iter().enumerate() {
            if s.index != i || s.text.contains('\n') || s.text.trim().is_empty() {
                return Err(Error::Contract(format!("sample {}: malformed step {i}", self.id)));
            }
        }
        if self.answer.is_empty() || normalize_answer(&self.answer, self.task_kind) != self.answer {
            return Err(Error::Contract(format!(
                "sample {}: answer {:?} is not normalized",
                self.id, self.answer
            )));
        }
        Ok(())
    }
}

pub fn steps_from<S: AsRef<str>>(lines: &[S]) -> Vec<ReasoningStep> {
    lines
        .iter()
        .enumerate()
        .map(|(index, l)| ReasoningStep {
            text: l.as_ref().to_string(),
            index,
        })
        .collect()
}

/// Splits a raw rationale on newlines, dropping blank lines.
pub fn split_rationale(raw: &str) -> Result<Vec<ReasoningStep>> {
    let lines: Vec<&str> = raw
        .split('\n')
        .map(|l| l.strip_suffix('\r').unwrap_or(l))
        .filter(|l| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::EmptyRationale);
    }
    Ok(steps_from(&lines))
}

/// Size parameters for the synthetic generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub task_kind: TaskKind,
    /// Players in an object-swap game.
    pub entities: usize,
    /// Swaps in an object-swap game.
    pub swaps: usize,
    /// Names in a last-letter question.
    pub names: usize,
    /// Terms in an arithmetic problem.
    pub terms: usize,
    /// Largest operand in an arithmetic problem.
    pub max_operand: u32,
    /// Allow subtraction steps in arithmetic problems.
    pub subtraction: bool,
    pub seed: u64,
}

impl TaskConfig {
    pub fn new(task_kind: TaskKind, seed: u64) -> Self {
        TaskConfig {
            task_kind,
            entities: 3,
            swaps: 3,
            names: 4,
            terms: 3,
            max_operand: 50,
            subtraction: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        match self.task_kind {
            TaskKind::ObjectSwap => {
                if self.entities < 2 {
                    return bad("object swap needs at least 2 entities");
                }
                if self.entities > generators::MAX_PLAYERS {
                    return bad("too many entities for the name pool");
                }
                if self.swaps == 0 {
                    return bad("object swap needs at least 1 swap");
                }
            }
            TaskKind::LastLetter => {
                if self.names == 0 {
                    return bad("last letter needs at least 1 name");
                }
            }
            TaskKind::Arithmetic => {
                if self.terms < 2 {
                    return bad("arithmetic needs at least 2 terms");
                }
                if self.max_operand == 0 {
                    return bad("arithmetic needs a positive operand range");
                }
            }
            TaskKind::Imported => return bad("imported samples cannot be generated"),
        }
        Ok(())
    }
}
