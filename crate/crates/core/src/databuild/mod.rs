//! Training examples: full-rationale, chunk-wise stages, skip-thinking, and
//! the skip labels that drive them.

mod examples;
mod mask;
mod skip;

pub use examples::{
    build_baseline_example, build_cwt_examples, build_skipall_example, build_staged_examples,
    build_stt_examples, build_weighted_example, check_sample, load_examples, save_examples,
    token_total, ExampleKind, ExampleRecord, StagePrefix, TrainingExample,
};
pub use mask::{core_char_mask, core_token_mask};
pub use skip::{generate_skip_labels, Decision, LabelMode, SkipLabel};
