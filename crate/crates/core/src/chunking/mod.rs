//! Partitions of a rationale's steps into chunks: average, granular and
//! loss-guided search.

mod plan;
mod score;
mod search;

pub use plan::{
    average_chunk, granular_chunk, load_plans, save_plans, split_sentences, ChunkPlan, Granularity,
    PlanRecord, Unit,
};
pub use score::{chunk_stage_loss, stage_sequence, ModelScorer, Scorer};
pub use search::{search_chunk, Anneal, SearchConfig};
