//! Near-duplicate detection for job postings.
//!
//! Postings are normalized and skill-extracted once ([`preprocess`]), then
//! every candidate pair is scored by three families of scorers: character
//! block overlap ([`overlap`]), embedding cosine similarity ([`embedding`])
//! and inverse-frequency weighted skill matching ([`weights`]). The
//! [`pipeline`] combines the skill-based scores into a total score and applies
//! the decision rules; [`eval`] measures any score against labeled pairs.

pub mod embedding;
pub mod error;
pub mod eval;
pub mod overlap;
pub mod pipeline;
pub mod planted;
pub mod preprocess;
pub mod store;
pub mod weights;

pub use error::{Error, Result};
