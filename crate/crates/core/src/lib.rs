//! Core algorithms for restoring punctuation and capitalization to raw
//! (lowercased, unpunctuated) ASR transcripts.
//!
//! The crate is organized around a conditional joint sequence tagger: a
//! transformer encoder predicts a punctuation label per word, and the casing
//! head consumes the punctuation distribution together with the hidden state,
//! so casing is conditioned on punctuation. Everything needed to train and run
//! that model at desk scale lives here:
//!
//! - [`corpus`] — label derivation from punctuated text, surface realization,
//!   deterministic corpus splits, and the mixed-case lexicon.
//! - [`tokenizer`] — trainable subword (wordpiece-style) and word-level
//!   vocabularies, plus label projection onto word-final pieces.
//! - [`model`] — the encoder, the punctuation / casing / masked-token heads,
//!   the weighted joint loss, and exact analytic gradients.
//! - [`training`] — masked-token pretraining (random or punctuation-selective
//!   masking) and supervised joint fine-tuning.
//! - [`inference`] — sliding-window chunking for long transcripts and
//!   end-to-end text restoration.
//! - [`robustness`] — word-level edit-distance alignment, transfer of labels
//!   from references onto ASR hypotheses, WER-based filtering, and n-best
//!   training-set augmentation.
//! - [`evaluation`] — per-class precision / recall / F1 reports.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the command
//! line live in the companion `puncase` crate. All operations are
//! deterministic given their seeds, and inference-side state is immutable, so
//! everything here is safe to call concurrently.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod rng;
pub mod robustness;
pub mod tokenizer;
pub mod training;

pub use corpus::{CaseLabel, LabeledSequence, LabeledToken, PunctLabel};
pub use model::{EncoderConfig, ModelParameters};
pub use tokenizer::Vocabulary;
