//! Chunk-wise chain-of-thought distillation for small autoregressive students.
//!
//! Pipeline: [`corpus`] samples with step-wise rationales, [`chunking`] plans,
//! [`databuild`] training examples, [`train`] regimes, [`eval`] reports.
//! Rationales come from the generators or an external completion endpoint
//! ([`teacher`]).

pub mod chunking;
pub mod corpus;
pub mod databuild;
pub mod error;
pub mod eval;
pub mod layout;
pub mod model;
pub mod store;
pub mod teacher;
pub mod train;

pub use error::{Error, Result};
