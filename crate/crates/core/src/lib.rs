//! Classification-aware neural topic modelling for short fact-check texts,
//! together with the dataset curation, evaluation and trend-analysis tooling
//! around it.

pub mod analysis;
pub mod corpus;
pub mod enrich;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod topics;
pub mod training;

pub use error::{Error, Result};
