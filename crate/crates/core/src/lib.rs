//! Multi-task clinical question answering.
//!
//! A single transformer encoder is trained jointly for two tasks: extracting
//! the answer span from a clinical note, and assigning the answer to one of
//! five medical categories (diagnosis, medication, symptoms, procedure, lab
//! report). The lower encoder layers are shared; each task owns a
//! parameter-disjoint stack of upper layers, so gradients of one task's loss
//! never reach the other task's branch.
//!
//! The crate covers the whole flow:
//!
//! - [`corpus`]: JSONL records, stratified splitting, class weights,
//!   oversampling and a synthetic clinical corpus generator.
//! - [`categorizer`]: offline gazetteer NER that labels answers with a
//!   category (hard) or a per-category distribution (soft).
//! - [`tokenizer`]: WordPiece vocabulary, `[CLS] Q [SEP] C [SEP]` packing and
//!   character-to-token answer alignment.
//! - [`model`]: the encoder, span and classification heads, hand-written
//!   backward pass and checkpoint format.
//! - [`training`]: losses, AdamW, warmup/decay schedule, the training loop,
//!   loss-weight grid search and the single-task vs multi-task ablation.
//! - [`evaluation`]: token F1, exact match, classification metrics and the
//!   error taxonomy.
//! - [`cli`]: the `preprocess`/`train`/`eval`/`predict`/`ablate` commands.

pub mod categorizer;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod tokenizer;
pub mod training;

pub use error::{Error, Result};
