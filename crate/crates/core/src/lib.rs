//! Cross-lingual, cross-domain sentiment classification under multi-target
//! adversarial training.
//!
//! The crate is organised around a small set of subsystems:
//!
//! - [`corpus`]: the review record schema, JSON-lines I/O, text
//!   normalization, deduplication, language verification, and corpus
//!   statistics.
//! - [`datagen`]: a synthetic review generator with a controllable
//!   domain confound, used to make the adversarial benefit measurable
//!   without the real corpus.
//! - [`autodiff`]: a dense-tensor reverse-mode differentiation engine.
//! - [`model`]: hashed bag-of-words featurizer, shared encoder, and the
//!   three classification heads (rating, domain, language).
//! - [`trainer`]: the combined adversarial loss with loss reversal,
//!   meta-learned adversarial coefficients, AdamW with warmup/decay, and
//!   the early-stopping training loop.
//! - [`evaluation`]: accuracy and macro-F1 with per-domain/per-language
//!   report generation.
//! - [`llmeval`]: few-shot prompt rendering, a JSON-over-HTTP completion
//!   client, and the rating-prediction evaluation harness.

pub mod autodiff;
pub mod corpus;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod llmeval;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
