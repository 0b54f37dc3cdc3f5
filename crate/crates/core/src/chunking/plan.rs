use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Sample;
use crate::error::{Error, Result};
use crate::store::{self, Provenance};

/// What a plan's positions index.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    /// Newline-delimited reasoning steps.
    #[default]
    Step,
    /// Sentences within the steps.
    Sentence,
}

/// An ordered partition of a sample's units into contiguous, non-empty chunks.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub sample_id: String,
    pub unit: Unit,
    /// Exclusive end of each chunk; the last entry is the unit count.
    pub boundaries: Vec<usize>,
}

impl ChunkPlan {
    pub fn from_boundaries(sample_id: &str, unit: Unit, boundaries: Vec<usize>) -> Result<Self> {
        let plan = ChunkPlan {
            sample_id: sample_id.to_string(),
            unit,
            boundaries,
        };
        plan.check()?;
        Ok(plan)
    }

    fn check(&self) -> Result<()> {
        let mut prev = 0;
        for &b in &self.boundaries {
            if b <= prev {
                return Err(Error::Contract(format!(
                    "plan for {}: boundaries {:?} are not strictly increasing from 1",
                    self.sample_id, self.boundaries
                )));
            }
            prev = b;
        }
        if self.boundaries.is_empty() {
            return Err(Error::Contract(format!("plan for {} has no chunks", self.sample_id)));
        }
        Ok(())
    }

    /// Effective number of chunks.
    pub fn num_chunks(&self) -> usize {
        self.boundaries.len()
    }

    pub fn num_units(&self) -> usize {
        *self.boundaries.last().unwrap_or(&0)
    }

    pub fn chunks(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.boundaries
            .iter()
            .map(|&end| {
                let r = start..end;
                start = end;
                r
            })
            .collect()
    }

    /// The units this plan partitions, each with the separator that follows it
    /// in the raw rationale (empty after the last unit).
    pub fn units_with_separators(&self, sample: &Sample) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for (i, step) in sample.steps.iter().enumerate() {
            match self.unit {
                Unit::Step => out.push((step.text.clone(), String::new())),
                Unit::Sentence => out.extend(split_sentences(&step.text)),
            }
            if i + 1 < sample.steps.len() {
                out.last_mut().unwrap().1.push('\n');
            }
        }
        out
    }

    pub fn units(&self, sample: &Sample) -> Vec<String> {
        self.units_with_separators(sample).into_iter().map(|(u, _)| u).collect()
    }

    /// Chunk texts: each chunk's units with their original separators between them.
    pub fn chunk_texts(&self, sample: &Sample) -> Result<Vec<String>> {
        Ok(self.chunk_texts_with_separators(sample)?.into_iter().map(|(t, _)| t).collect())
    }

    fn chunk_texts_with_separators(&self, sample: &Sample) -> Result<Vec<(String, String)>> {
        self.validate_for(sample)?;
        let units = self.units_with_separators(sample);
        Ok(self
            .chunks()
            .into_iter()
            .map(|r| {
                let mut text = String::new();
                for (i, (u, sep)) in units[r.clone()].iter().enumerate() {
                    text.push_str(u);
                    if i + 1 < r.len() {
                        text.push_str(sep);
                    }
                }
                (text, units[r.end - 1].1.clone())
            })
            .collect())
    }

    /// Rebuilds the raw rationale from the chunks.
    pub fn reconstruct(&self, sample: &Sample) -> Result<String> {
        Ok(self
            .chunk_texts_with_separators(sample)?
            .into_iter()
            .map(|(t, sep)| t + &sep)
            .collect())
    }

    /// Checks the partition invariants against `sample`.
    pub fn validate_for(&self, sample: &Sample) -> Result<()> {
        self.check()?;
        if self.sample_id != sample.id {
            return Err(Error::Contract(format!(
                "plan for {} applied to sample {}",
                self.sample_id, sample.id
            )));
        }
        let n = self.units(sample).len();
        if self.num_units() != n {
            return Err(Error::Contract(format!(
                "plan for {} covers {} units, sample has {n}",
                self.sample_id,
                self.num_units()
            )));
        }
        Ok(())
    }
}

/// Equal-size chunking: `g = floor(L / M)` units per chunk, the last chunk
/// taking the remainder. `M` is clamped to `L`.
pub fn average_chunk(sample_id: &str, num_units: usize, m: usize) -> Result<ChunkPlan> {
    if num_units == 0 {
        return Err(Error::EmptyRationale);
    }
    if m == 0 {
        return Err(Error::Config("chunk count must be at least 1".into()));
    }
    let m = m.min(num_units);
    let g = num_units / m;
    let mut boundaries: Vec<usize> = (1..m).map(|k| g * k).collect();
    boundaries.push(num_units);
    ChunkPlan::from_boundaries(sample_id, Unit::Step, boundaries)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sentence,
    Step,
}

/// Splits text after `.`, `!` or `?` followed by whitespace or the end.
///
/// Returns each sentence with the whitespace that followed it, so that
/// concatenating `sentence + separator` reproduces `text` exactly.
pub fn split_sentences(text: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut start = 0;
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let next_ws = chars.get(i + 1).is_none_or(|&(_, n)| n.is_whitespace());
        if matches!(c, '.' | '!' | '?') && next_ws {
            let end = pos + c.len_utf8();
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let sep_end = chars.get(j).map_or(text.len(), |&(p, _)| p);
            out.push((text[start..end].to_string(), text[end..sep_end].to_string()));
            start = sep_end;
            i = j;
        } else {
            i += 1;
        }
    }
    if start < text.len() {
        out.push((text[start..].to_string(), String::new()));
    }
    out
}

/// One chunk per step or per sentence.
pub fn granular_chunk(sample: &Sample, mode: Granularity) -> Result<ChunkPlan> {
    if sample.steps.is_empty() {
        return Err(Error::EmptyRationale);
    }
    let unit = match mode {
        Granularity::Step => Unit::Step,
        Granularity::Sentence => Unit::Sentence,
    };
    let probe = ChunkPlan {
        sample_id: sample.id.clone(),
        unit,
        boundaries: vec![1],
    };
    let n = probe.units(sample).len();
    ChunkPlan::from_boundaries(&sample.id, unit, (1..=n).collect())
}

/// Persisted form of a plan, tagged with the epoch that produced it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub sample_id: String,
    pub epoch: usize,
    pub unit: Unit,
    pub boundaries: Vec<usize>,
    pub effective_m: usize,
}

impl PlanRecord {
    pub fn new(plan: &ChunkPlan, epoch: usize) -> Self {
        PlanRecord {
            sample_id: plan.sample_id.clone(),
            epoch,
            unit: plan.unit,
            boundaries: plan.boundaries.clone(),
            effective_m: plan.num_chunks(),
        }
    }

    pub fn plan(&self) -> Result<ChunkPlan> {
        if self.effective_m != self.boundaries.len() {
            return Err(Error::Contract(format!(
                "plan record for {}: effective M {} but {} boundaries",
                self.sample_id,
                self.effective_m,
                self.boundaries.len()
            )));
        }
        ChunkPlan::from_boundaries(&self.sample_id, self.unit, self.boundaries.clone())
    }
}

pub fn save_plans(plans: &[ChunkPlan], epoch: usize, path: &Path, header: Option<&Provenance>) -> Result<()> {
    let recs: Vec<PlanRecord> = plans.iter().map(|p| PlanRecord::new(p, epoch)).collect();
    store::write_jsonl(path, &recs, header)
}

pub fn load_plans(path: &Path) -> Result<(Option<Provenance>, Vec<ChunkPlan>)> {
    let (header, recs) = store::read_jsonl::<PlanRecord>(path)?;
    let plans = recs.iter().map(PlanRecord::plan).collect::<Result<_>>()?;
    Ok((header, plans))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{split_rationale, TaskKind};
    use proptest::prelude::*;

    fn sample(raw: &str) -> Sample {
        Sample {
            id: "s".into(),
            question: "q".into(),
            answer: "x".into(),
            steps: split_rationale(raw).unwrap(),
            task_kind: TaskKind::Imported,
        }
    }

    fn ranges(p: &ChunkPlan) -> Vec<(usize, usize)> {
        p.chunks().into_iter().map(|r| (r.start, r.end)).collect()
    }

    #[test]
    fn average_examples() {
        assert_eq!(ranges(&average_chunk("s", 7, 3).unwrap()), [(0, 2), (2, 4), (4, 7)]);
        assert_eq!(ranges(&average_chunk("s", 4, 4).unwrap()), [(0, 1), (1, 2), (2, 3), (3, 4)]);
        let p = average_chunk("s", 2, 4).unwrap();
        assert_eq!(p.num_chunks(), 2);
        assert_eq!(ranges(&p), [(0, 1), (1, 2)]);
        assert_eq!(ranges(&average_chunk("s", 5, 1).unwrap()), [(0, 5)]);
        assert!(average_chunk("s", 0, 2).is_err());
    }

    #[test]
    fn granular_examples() {
        let s = sample("a.\nb.\nc.\nd.");
        assert_eq!(granular_chunk(&s, Granularity::Step).unwrap().num_chunks(), 4);
        let s = sample("A. B. C.");
        let p = granular_chunk(&s, Granularity::Sentence).unwrap();
        assert_eq!(p.chunk_texts(&s).unwrap(), ["A.", "B.", "C."]);
        let plums = sample(
            "Alyssa picked 17 plums. Jason picked 10 plums. 17 + 10 = 27 plums. \
             Melanie picked 35 pears. 27 + 35 = 62. There were 62 fruits picked in all.",
        );
        let p = granular_chunk(&plums, Granularity::Sentence).unwrap();
        let texts = p.chunk_texts(&plums).unwrap();
        assert_eq!(texts.len(), 6);
        assert_eq!(texts[0], "Alyssa picked 17 plums.");
        assert_eq!(texts[5], "There were 62 fruits picked in all.");
    }

    #[test]
    fn sentences_keep_their_separators() {
        let parts = split_sentences("Hi there.  Is 3.5 ok? Yes!tail end");
        let joined: String = parts.iter().map(|(a, b)| format!("{a}{b}")).collect();
        assert_eq!(joined, "Hi there.  Is 3.5 ok? Yes!tail end");
        assert_eq!(parts.len(), 3);
    }

    #[test]
    fn plan_rejects_mismatch() {
        let s = sample("a\nb\nc");
        assert!(average_chunk("s", 4, 2).unwrap().validate_for(&s).is_err());
        assert!(average_chunk("t", 3, 2).unwrap().validate_for(&s).is_err());
        assert!(ChunkPlan::from_boundaries("s", Unit::Step, vec![2, 2, 3]).is_err());
    }

    #[test]
    fn plans_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let plans = vec![average_chunk("a", 7, 3).unwrap(), average_chunk("b", 2, 4).unwrap()];
        save_plans(&plans, 5, &path, None).unwrap();
        assert_eq!(load_plans(&path).unwrap().1, plans);
    }

    proptest! {
        #[test]
        fn every_mode_partitions_and_reconstructs(
            lines in prop::collection::vec("[a-z]{1,6}( [a-z]{1,5}[.!?]?){0,3}", 1..12),
            m in 1usize..7,
        ) {
            let s = sample(&lines.join("\n"));
            let raw = s.rationale();
            let mut plans = vec![average_chunk("s", s.steps.len(), m).unwrap()];
            plans.push(granular_chunk(&s, Granularity::Step).unwrap());
            plans.push(granular_chunk(&s, Granularity::Sentence).unwrap());
            for p in plans {
                let r = p.chunks();
                prop_assert_eq!(r[0].start, 0);
                for w in r.windows(2) {
                    prop_assert_eq!(w[0].end, w[1].start);
                }
                prop_assert!(r.iter().all(|c| !c.is_empty()));
                prop_assert_eq!(p.reconstruct(&s).unwrap(), raw.clone());
                if p.unit == Unit::Step {
                    prop_assert_eq!(p.chunk_texts(&s).unwrap().join("\n"), raw.clone());
                }
            }
        }
    }
}
