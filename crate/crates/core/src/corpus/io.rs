//! Dataset files: one JSON record per line with a fixed field order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{split_rationale, Sample, TaskKind};
use crate::error::{Error, Result};
use crate::store::{self, Provenance};

/// On-disk form of a [`Sample`]; the rationale is stored raw.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub rationale: String,
    pub task_kind: TaskKind,
}

impl From<&Sample> for SampleRecord {
    fn from(s: &Sample) -> Self {
        SampleRecord {
            id: s.id.clone(),
            question: s.question.clone(),
            answer: s.answer.clone(),
            rationale: s.rationale(),
            task_kind: s.task_kind,
        }
    }
}

pub fn save_dataset(samples: &[Sample], path: &Path, header: Option<&Provenance>) -> Result<()> {
    let records: Vec<SampleRecord> = samples.iter().map(SampleRecord::from).collect();
    store::write_jsonl(path, &records, header)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Sample>> {
    Ok(load_dataset_with_header(path)?.1)
}

pub fn load_dataset_with_header(path: &Path) -> Result<(Option<Provenance>, Vec<Sample>)> {
    let (header, rows) = store::read_lines(path)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, value) in rows {
        let perr = |field: &str, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            field: field.to_string(),
            message,
        };
        for field in ["id", "question", "answer", "rationale", "task_kind"] {
            match value.get(field) {
                None => return Err(perr(field, "missing field".into())),
                Some(v) if !v.is_string() => return Err(perr(field, "expected a string".into())),
                Some(_) => {}
            }
        }
        let rec: SampleRecord =
            serde_json::from_value(value).map_err(|e| perr("task_kind", e.to_string()))?;
        if rec.answer.is_empty() {
            return Err(perr("answer", "empty answer".into()));
        }
        let steps = split_rationale(&rec.rationale).map_err(|e| perr("rationale", e.to_string()))?;
        out.push(Sample {
            id: rec.id,
            question: rec.question,
            answer: rec.answer,
            steps,
            task_kind: rec.task_kind,
        });
    }
    Ok((header, out))
}
