//! Subword and word-level tokenization.
//!
//! The subword vocabulary is trained by greedy frequency merging (BPE style)
//! and applied with greedy longest-match-first segmentation, the usual
//! wordpiece inference rule. Non-initial pieces carry the `##` continuation
//! marker. Word-level labels are projected so that only the word-final piece
//! is supervised; other pieces are ignored by loss and metrics.
//!
//! Every vocabulary starts with the same fixed prefix: `[PAD]`, `[UNK]`,
//! `[MASK]` at ids 0..2, then the three punctuation marks `.` `,` `?` as
//! ordinary pieces, so masked-language-model corpora can always represent
//! (and mask) marks as tokens.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{CaseLabel, LabeledSequence, PunctLabel};

pub const PAD_ID: u32 = 0;
pub const UNK_ID: u32 = 1;
pub const MASK_ID: u32 = 2;

pub const PAD_TOKEN: &str = "[PAD]";
pub const UNK_TOKEN: &str = "[UNK]";
pub const MASK_TOKEN: &str = "[MASK]";

/// Continuation marker for non-initial subword pieces.
pub const CONTINUATION: &str = "##";

const RESERVED: [&str; 3] = [PAD_TOKEN, UNK_TOKEN, MASK_TOKEN];
const MARK_PIECES: [&str; 3] = [".", ",", "?"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenizerMode {
    Word,
    Subword,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenizerError {
    EmptyCorpus,
}

impl fmt::Display for TokenizerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenizerError::EmptyCorpus => {
                f.write_str("cannot train a vocabulary on an empty corpus")
            }
        }
    }
}

impl core::error::Error for TokenizerError {}

/// An ordered piece inventory. Piece position is the id, so a vocabulary file
/// round-trips byte-exactly as one piece per line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    pieces: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from the fixed prefix plus `extra` pieces in the
    /// given order. Duplicates of already-present pieces are skipped.
    pub fn from_pieces<I: IntoIterator<Item = String>>(extra: I) -> Self {
        let mut vocab = Vocabulary {
            pieces: Vec::new(),
            index: BTreeMap::new(),
        };
        for p in RESERVED.iter().chain(MARK_PIECES.iter()) {
            vocab.push(p);
        }
        for p in extra {
            vocab.push(&p);
        }
        vocab
    }

    fn push(&mut self, piece: &str) {
        if !self.index.contains_key(piece) {
            self.index
                .insert(piece.to_string(), self.pieces.len() as u32);
            self.pieces.push(piece.to_string());
        }
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn id(&self, piece: &str) -> Option<u32> {
        self.index.get(piece).copied()
    }

    pub fn piece(&self, id: u32) -> Option<&str> {
        self.pieces.get(id as usize).map(String::as_str)
    }

    pub fn pieces(&self) -> &[String] {
        &self.pieces
    }

    /// Ids of the `.` `,` `?` pieces, present in every vocabulary.
    pub fn mark_ids(&self) -> [u32; 3] {
        [
            self.id(".").unwrap(),
            self.id(",").unwrap(),
            self.id("?").unwrap(),
        ]
    }

    pub fn is_mark(&self, id: u32) -> bool {
        self.mark_ids().contains(&id)
    }
}

/// Trains a subword vocabulary by iterative pair merging.
///
/// `corpus` is any iterator of (already lowercased) words; repeats count.
/// Every character seen in the corpus enters the base alphabet in both plain
/// and continuation form, so any word over seen characters stays segmentable.
/// Merging stops when the vocabulary reaches `target_vocab_size` (total size,
/// including the fixed prefix and alphabet) or no pair occurs at least
/// `min_frequency` times. Frequency ties merge the lexicographically smallest
/// pair, keeping training deterministic.
pub fn train_subword<'a, I: IntoIterator<Item = &'a str>>(
    corpus: I,
    target_vocab_size: usize,
    min_frequency: u64,
) -> Result<Vocabulary, TokenizerError> {
    // Word -> frequency, word -> current symbol split.
    let mut word_freq: BTreeMap<String, u64> = BTreeMap::new();
    for word in corpus {
        if word.is_empty() {
            continue;
        }
        *word_freq.entry(word.to_string()).or_insert(0) += 1;
    }
    if word_freq.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }

    let mut splits: Vec<(Vec<String>, u64)> = word_freq
        .iter()
        .map(|(word, &freq)| {
            let symbols: Vec<String> = word
                .chars()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        c.to_string()
                    } else {
                        let mut s = String::from(CONTINUATION);
                        s.push(c);
                        s
                    }
                })
                .collect();
            (symbols, freq)
        })
        .collect();

    // Base alphabet: both plain and continuation form of every seen char.
    let mut alphabet: BTreeMap<String, ()> = BTreeMap::new();
    for word in word_freq.keys() {
        for c in word.chars() {
            alphabet.insert(c.to_string(), ());
            let mut cont = String::from(CONTINUATION);
            cont.push(c);
            alphabet.insert(cont, ());
        }
    }

    let mut vocab = Vocabulary::from_pieces(alphabet.keys().cloned());
    let min_frequency = min_frequency.max(1);

    while vocab.len() < target_vocab_size {
        let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
        for (symbols, freq) in &splits {
            for pair in symbols.windows(2) {
                *pair_counts
                    .entry((pair[0].clone(), pair[1].clone()))
                    .or_insert(0) += freq;
            }
        }
        // Highest count wins; ties take the lexicographically smallest pair.
        let best = pair_counts
            .into_iter()
            .max_by(|(pa, ca), (pb, cb)| ca.cmp(cb).then_with(|| pb.cmp(pa)));
        let Some(((left, right), count)) = best else {
            break;
        };
        if count < min_frequency {
            break;
        }

        let merged = merge_symbols(&left, &right);
        for (symbols, _) in &mut splits {
            let mut i = 0;
            while i + 1 < symbols.len() {
                if symbols[i] == left && symbols[i + 1] == right {
                    symbols[i] = merged.clone();
                    symbols.remove(i + 1);
                } else {
                    i += 1;
                }
            }
        }
        vocab.push(&merged);
    }

    Ok(vocab)
}

fn merge_symbols(left: &str, right: &str) -> String {
    let mut out = String::from(left);
    out.push_str(right.strip_prefix(CONTINUATION).unwrap_or(right));
    out
}

/// Word-level vocabulary: the `max_size` most frequent words (frequency ties
/// break lexicographically), after the fixed prefix.
pub fn word_vocab<'a, I: IntoIterator<Item = &'a str>>(
    corpus: I,
    max_size: usize,
) -> Result<Vocabulary, TokenizerError> {
    let mut freq: BTreeMap<String, u64> = BTreeMap::new();
    for word in corpus {
        if word.is_empty() {
            continue;
        }
        *freq.entry(word.to_string()).or_insert(0) += 1;
    }
    if freq.is_empty() {
        return Err(TokenizerError::EmptyCorpus);
    }
    let mut by_freq: Vec<(String, u64)> = freq.into_iter().collect();
    by_freq.sort_by(|(wa, ca), (wb, cb)| cb.cmp(ca).then_with(|| wa.cmp(wb)));
    by_freq.truncate(max_size);
    Ok(Vocabulary::from_pieces(by_freq.into_iter().map(|(w, _)| w)))
}

/// Greedy longest-match-first segmentation of one word. Returns piece ids;
/// a word with no matching prefix at any point becomes a single `[UNK]`.
pub fn encode_word(word: &str, vocab: &Vocabulary) -> Vec<u32> {
    let mut ids = Vec::new();
    let mut rest = word;
    let mut first = true;
    while !rest.is_empty() {
        let mut matched = None;
        // Longest candidate first; candidates must end at char boundaries.
        let mut end = rest.len();
        loop {
            let candidate = &rest[..end];
            let lookup = if first {
                vocab.id(candidate)
            } else {
                let mut c = String::from(CONTINUATION);
                c.push_str(candidate);
                vocab.id(&c)
            };
            if let Some(id) = lookup {
                matched = Some((id, end));
                break;
            }
            match rest[..end].char_indices().next_back() {
                Some((last_start, _)) if last_start > 0 => end = last_start,
                _ => break,
            }
        }
        match matched {
            Some((id, len)) => {
                ids.push(id);
                rest = &rest[len..];
                first = false;
            }
            None => return vec![UNK_ID],
        }
    }
    if ids.is_empty() {
        vec![UNK_ID]
    } else {
        ids
    }
}

/// Joins pieces back into the word they segment, stripping continuation
/// markers. `[UNK]` has no surface and is rendered as the unknown token.
pub fn detokenize(ids: &[u32], vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for &id in ids {
        match vocab.piece(id) {
            Some(p) => out.push_str(p.strip_prefix(CONTINUATION).unwrap_or(p)),
            None => out.push_str(UNK_TOKEN),
        }
    }
    out
}

/// A piece-level view of a word sequence with labels projected onto
/// word-final pieces. `labels[i]` is `None` for pieces excluded from loss and
/// metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordEncoding {
    pub piece_ids: Vec<u32>,
    pub parent_word: Vec<usize>,
    pub is_word_final: Vec<bool>,
    pub labels: Vec<Option<(PunctLabel, CaseLabel)>>,
}

impl SubwordEncoding {
    pub fn len(&self) -> usize {
        self.piece_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.piece_ids.is_empty()
    }

    /// Piece index of the word-final (supervised) piece of each word.
    pub fn word_final_positions(&self) -> Vec<usize> {
        self.is_word_final
            .iter()
            .enumerate()
            .filter_map(|(i, &last)| last.then_some(i))
            .collect()
    }
}

/// Encodes a labeled sequence in the requested mode. In word mode every word
/// is exactly one piece (`[UNK]` when out of vocabulary); in subword mode a
/// word may span several pieces and only the final piece carries the word's
/// labels.
pub fn encode_sequence(
    seq: &LabeledSequence,
    vocab: &Vocabulary,
    mode: TokenizerMode,
) -> SubwordEncoding {
    let mut enc = SubwordEncoding {
        piece_ids: Vec::new(),
        parent_word: Vec::new(),
        is_word_final: Vec::new(),
        labels: Vec::new(),
    };
    for (w, tok) in seq.tokens.iter().enumerate() {
        let ids = match mode {
            TokenizerMode::Word => vec![vocab.id(&tok.lower_form).unwrap_or(UNK_ID)],
            TokenizerMode::Subword => encode_word(&tok.lower_form, vocab),
        };
        let n = ids.len();
        for (i, id) in ids.into_iter().enumerate() {
            let last = i == n - 1;
            enc.piece_ids.push(id);
            enc.parent_word.push(w);
            enc.is_word_final.push(last);
            enc.labels.push(last.then_some((tok.punct, tok.case)));
        }
    }
    enc
}

/// Piece-id sequence for masked-language-model training: each word's pieces
/// followed by its punctuation mark as an ordinary token, so marks are
/// predictable (and maskable) like any other piece.
pub fn encode_for_mlm(seq: &LabeledSequence, vocab: &Vocabulary, mode: TokenizerMode) -> Vec<u32> {
    let mark_ids = vocab.mark_ids();
    let mut out = Vec::new();
    for tok in &seq.tokens {
        match mode {
            TokenizerMode::Word => out.push(vocab.id(&tok.lower_form).unwrap_or(UNK_ID)),
            TokenizerMode::Subword => out.extend(encode_word(&tok.lower_form, vocab)),
        }
        match tok.punct {
            PunctLabel::Period => out.push(mark_ids[0]),
            PunctLabel::Comma => out.push(mark_ids[1]),
            PunctLabel::QuestionMark => out.push(mark_ids[2]),
            PunctLabel::NoPunct => {}
        }
    }
    out
}
