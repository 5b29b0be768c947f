//! Long-transcript inference: sliding-window chunking, per-chunk prediction,
//! merge back to one label per word, and end-to-end text restoration.
//!
//! Chunks are measured in words. Each chunk owns a core region; consecutive
//! cores tile the word sequence exactly, and only core predictions survive
//! the merge — the overlap regions exist to give every core word bilateral
//! context. If a chunk's subword expansion overflows the encoder, its core is
//! re-split in half and retried.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{self, CaseLabel, LabeledSequence, LabeledToken, MixedCaseLexicon, PunctLabel};
use crate::model::{ModelError, ModelParameters};
use crate::tokenizer::{encode_sequence, SubwordEncoding, TokenizerMode, Vocabulary};

/// A windowed slice of a word sequence: context plus owned core.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Chunk {
    /// Window span including context, `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// Core region whose predictions are kept, `[core_start, core_end)`.
    pub core_start: usize,
    pub core_end: usize,
}

impl Chunk {
    pub fn window_len(&self) -> usize {
        self.end - self.start
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InferenceError {
    EmptyInput,
    InvalidChunking(&'static str),
    /// Core regions failed to tile the sequence; indicates a logic error in
    /// chunk construction rather than bad input.
    InternalError(&'static str),
    /// A single word expands past the encoder length; no re-split can help.
    WordTooLong {
        word_index: usize,
        pieces: usize,
        max: usize,
    },
    Model(ModelError),
}

impl fmt::Display for InferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InferenceError::EmptyInput => f.write_str("no words to predict on"),
            InferenceError::InvalidChunking(msg) => write!(f, "invalid chunking: {msg}"),
            InferenceError::InternalError(msg) => write!(f, "internal error: {msg}"),
            InferenceError::WordTooLong {
                word_index,
                pieces,
                max,
            } => write!(
                f,
                "word {word_index} expands to {pieces} pieces, beyond the encoder limit {max}"
            ),
            InferenceError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for InferenceError {}

impl From<ModelError> for InferenceError {
    fn from(e: ModelError) -> Self {
        InferenceError::Model(e)
    }
}

impl From<corpus::CorpusError> for InferenceError {
    fn from(_: corpus::CorpusError) -> Self {
        InferenceError::EmptyInput
    }
}

/// Splits `total_words` into chunks with the given core width and symmetric
/// overlap. The first chunk has no left context and the last no right
/// context; consecutive cores tile `[0, total_words)` exactly.
pub fn chunk(
    total_words: usize,
    core: usize,
    overlap: usize,
) -> Result<Vec<Chunk>, InferenceError> {
    if total_words == 0 {
        return Err(InferenceError::EmptyInput);
    }
    if core == 0 {
        return Err(InferenceError::InvalidChunking(
            "core width must be at least 1",
        ));
    }
    let mut chunks = Vec::new();
    let mut core_start = 0;
    while core_start < total_words {
        let core_end = core_start.saturating_add(core).min(total_words);
        chunks.push(Chunk {
            start: core_start.saturating_sub(overlap),
            end: core_end.saturating_add(overlap).min(total_words),
            core_start,
            core_end,
        });
        core_start = core_end;
    }
    Ok(chunks)
}

/// Collapses per-chunk word labels to one label per word: each word's label
/// comes from the unique chunk whose core owns it.
pub fn merge(
    chunks: &[Chunk],
    chunk_labels: &[Vec<(PunctLabel, CaseLabel)>],
    total_words: usize,
) -> Result<Vec<(PunctLabel, CaseLabel)>, InferenceError> {
    if chunks.len() != chunk_labels.len() {
        return Err(InferenceError::InternalError(
            "one label vector per chunk required",
        ));
    }
    verify_tiling(chunks, total_words)?;
    let mut merged = Vec::with_capacity(total_words);
    for (chunk, labels) in chunks.iter().zip(chunk_labels) {
        if labels.len() != chunk.window_len() {
            return Err(InferenceError::InternalError(
                "chunk labels must cover its window",
            ));
        }
        for w in chunk.core_start..chunk.core_end {
            merged.push(labels[w - chunk.start]);
        }
    }
    Ok(merged)
}

fn verify_tiling(chunks: &[Chunk], total_words: usize) -> Result<(), InferenceError> {
    let mut expected = 0;
    for c in chunks {
        if c.core_start != expected
            || c.core_end <= c.core_start
            || c.start > c.core_start
            || c.end < c.core_end
        {
            return Err(InferenceError::InternalError(
                "cores do not tile the sequence",
            ));
        }
        expected = c.core_end;
    }
    if expected != total_words {
        return Err(InferenceError::InternalError(
            "cores do not cover the sequence",
        ));
    }
    Ok(())
}

/// Deterministic argmax: ties go to the lowest class index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Predicts per-word labels for one already-encoded sequence by argmax over
/// the two heads at word-final pieces.
pub fn predict_encoded(
    params: &ModelParameters,
    enc: &SubwordEncoding,
) -> Result<Vec<(PunctLabel, CaseLabel)>, ModelError> {
    let hidden = params.encode(&enc.piece_ids)?;
    let punct_probs = params.punct_head_probs(&hidden);
    let case_probs = params.case_head_probs(&hidden, &punct_probs);
    Ok(enc
        .word_final_positions()
        .into_iter()
        .map(|pos| {
            let p = PunctLabel::from_index(argmax(punct_probs.row(pos))).unwrap();
            let c = CaseLabel::from_index(argmax(case_probs.row(pos))).unwrap();
            (p, c)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChunkOptions {
    pub core: usize,
    pub overlap: usize,
}

impl Default for ChunkOptions {
    fn default() -> Self {
        ChunkOptions {
            core: 200,
            overlap: 50,
        }
    }
}

/// End-to-end restoration output.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub text: String,
    pub sequence: LabeledSequence,
    /// Chunks that had to be re-split because their subword expansion
    /// overflowed the encoder.
    pub resplit_chunks: usize,
}

/// Restores punctuation and casing for raw text: normalizes to lowercase
/// words (stripping any marks already present), chunks, predicts, merges and
/// realizes the surface string.
pub fn predict(
    text: &str,
    params: &ModelParameters,
    vocab: &Vocabulary,
    mode: TokenizerMode,
    lexicon: &MixedCaseLexicon,
    options: ChunkOptions,
) -> Result<Prediction, InferenceError> {
    let derived = corpus::derive_labels(text)?;
    let words: Vec<String> = derived
        .sequence
        .tokens
        .into_iter()
        .map(|t| t.lower_form)
        .collect();
    predict_words(&words, params, vocab, mode, lexicon, options)
}

/// [`predict`] over an already-normalized lowercase word list.
pub fn predict_words(
    words: &[String],
    params: &ModelParameters,
    vocab: &Vocabulary,
    mode: TokenizerMode,
    lexicon: &MixedCaseLexicon,
    options: ChunkOptions,
) -> Result<Prediction, InferenceError> {
    if words.is_empty() {
        return Err(InferenceError::EmptyInput);
    }
    let chunks = chunk(words.len(), options.core, options.overlap)?;

    let mut final_chunks = Vec::new();
    let mut final_labels = Vec::new();
    let mut resplit = 0usize;
    for c in chunks {
        label_chunk(
            c,
            words,
            params,
            vocab,
            mode,
            options.overlap,
            &mut final_chunks,
            &mut final_labels,
            &mut resplit,
        )?;
    }
    let merged = merge(&final_chunks, &final_labels, words.len())?;

    let sequence = LabeledSequence {
        tokens: words
            .iter()
            .zip(&merged)
            .map(|(w, &(p, c))| LabeledToken::new(w, p, c))
            .collect(),
    };
    let text = corpus::realize(&sequence, lexicon);
    Ok(Prediction {
        text,
        sequence,
        resplit_chunks: resplit,
    })
}

/// Labels one chunk window, re-splitting its core in half when the subword
/// expansion overflows the encoder.
#[allow(clippy::too_many_arguments)]
fn label_chunk(
    c: Chunk,
    words: &[String],
    params: &ModelParameters,
    vocab: &Vocabulary,
    mode: TokenizerMode,
    overlap: usize,
    out_chunks: &mut Vec<Chunk>,
    out_labels: &mut Vec<Vec<(PunctLabel, CaseLabel)>>,
    resplit: &mut usize,
) -> Result<(), InferenceError> {
    let window = LabeledSequence {
        tokens: words[c.start..c.end]
            .iter()
            .map(|w| LabeledToken::new(w, PunctLabel::NoPunct, CaseLabel::LowerCase))
            .collect(),
    };
    let enc = encode_sequence(&window, vocab, mode);
    if enc.len() > params.config.max_seq_len {
        let core_len = c.core_end - c.core_start;
        if core_len <= 1 {
            // A single word too long even alone: report rather than loop.
            let pieces = enc.len();
            return Err(InferenceError::WordTooLong {
                word_index: c.core_start,
                pieces,
                max: params.config.max_seq_len,
            });
        }
        *resplit += 1;
        let mid = c.core_start + core_len / 2;
        for (cs, ce) in [(c.core_start, mid), (mid, c.core_end)] {
            let sub = Chunk {
                start: cs.saturating_sub(overlap),
                end: (ce + overlap).min(words.len()),
                core_start: cs,
                core_end: ce,
            };
            label_chunk(
                sub, words, params, vocab, mode, overlap, out_chunks, out_labels, resplit,
            )?;
        }
        return Ok(());
    }

    let per_word = predict_encoded(params, &enc)?;
    debug_assert_eq!(per_word.len(), c.window_len());
    out_chunks.push(c);
    out_labels.push(per_word);
    Ok(())
}
