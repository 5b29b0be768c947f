//! Labeled-corpus preparation: derive per-word punctuation and casing labels
//! from punctuated text, realize labeled sequences back to surface text, split
//! corpora deterministically, and collect mixed-case surface forms.
//!
//! The label scheme is one `(PunctLabel, CaseLabel)` pair per word. A
//! label-bearing mark (`.` `,` `?`) attaches to the word immediately before
//! it; runs of adjacent marks collapse by precedence question mark > period >
//! comma. Words keep inner hyphens and apostrophes; every other symbol is
//! stripped. PHI placeholder tags (`[NAME]`-style by default) survive as
//! single tokens.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::rng::Rng;

/// Punctuation attached after a word. The closed label set of the tagger.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PunctLabel {
    Comma,
    Period,
    QuestionMark,
    NoPunct,
}

/// Capitalization pattern of a word.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CaseLabel {
    LowerCase,
    UpperCase,
    AllCaps,
    MixedCase,
}

pub const PUNCT_CLASSES: usize = 4;
pub const CASE_CLASSES: usize = 4;

impl PunctLabel {
    pub const ALL: [PunctLabel; PUNCT_CLASSES] = [
        PunctLabel::Comma,
        PunctLabel::Period,
        PunctLabel::QuestionMark,
        PunctLabel::NoPunct,
    ];

    pub fn index(self) -> usize {
        match self {
            PunctLabel::Comma => 0,
            PunctLabel::Period => 1,
            PunctLabel::QuestionMark => 2,
            PunctLabel::NoPunct => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<PunctLabel> {
        Self::ALL.get(i).copied()
    }

    /// The mark a label realizes to, if any.
    pub fn mark(self) -> Option<char> {
        match self {
            PunctLabel::Comma => Some(','),
            PunctLabel::Period => Some('.'),
            PunctLabel::QuestionMark => Some('?'),
            PunctLabel::NoPunct => None,
        }
    }

    fn precedence(self) -> u8 {
        match self {
            PunctLabel::NoPunct => 0,
            PunctLabel::Comma => 1,
            PunctLabel::Period => 2,
            PunctLabel::QuestionMark => 3,
        }
    }

    /// Collapses two marks on the same word: question mark > period > comma.
    pub fn merge(self, other: PunctLabel) -> PunctLabel {
        if other.precedence() > self.precedence() {
            other
        } else {
            self
        }
    }
}

impl CaseLabel {
    pub const ALL: [CaseLabel; CASE_CLASSES] = [
        CaseLabel::LowerCase,
        CaseLabel::UpperCase,
        CaseLabel::AllCaps,
        CaseLabel::MixedCase,
    ];

    pub fn index(self) -> usize {
        match self {
            CaseLabel::LowerCase => 0,
            CaseLabel::UpperCase => 1,
            CaseLabel::AllCaps => 2,
            CaseLabel::MixedCase => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<CaseLabel> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for PunctLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PunctLabel::Comma => "comma",
            PunctLabel::Period => "period",
            PunctLabel::QuestionMark => "question_mark",
            PunctLabel::NoPunct => "no_punct",
        };
        f.write_str(s)
    }
}

impl fmt::Display for CaseLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseLabel::LowerCase => "lower_case",
            CaseLabel::UpperCase => "upper_case",
            CaseLabel::AllCaps => "all_caps",
            CaseLabel::MixedCase => "mixed_case",
        };
        f.write_str(s)
    }
}

impl core::str::FromStr for PunctLabel {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, UnknownLabel> {
        match s {
            "comma" => Ok(PunctLabel::Comma),
            "period" => Ok(PunctLabel::Period),
            "question_mark" => Ok(PunctLabel::QuestionMark),
            "no_punct" => Ok(PunctLabel::NoPunct),
            _ => Err(UnknownLabel),
        }
    }
}

impl core::str::FromStr for CaseLabel {
    type Err = UnknownLabel;
    fn from_str(s: &str) -> Result<Self, UnknownLabel> {
        match s {
            "lower_case" => Ok(CaseLabel::LowerCase),
            "upper_case" => Ok(CaseLabel::UpperCase),
            "all_caps" => Ok(CaseLabel::AllCaps),
            "mixed_case" => Ok(CaseLabel::MixedCase),
            _ => Err(UnknownLabel),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnknownLabel;

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("unknown label name")
    }
}

impl core::error::Error for UnknownLabel {}

/// One word with its labels and the surface form it was derived from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledToken {
    pub lower_form: String,
    pub original_form: String,
    pub punct: PunctLabel,
    pub case: CaseLabel,
}

impl LabeledToken {
    pub fn new(lower_form: &str, punct: PunctLabel, case: CaseLabel) -> Self {
        LabeledToken {
            lower_form: lower_form.to_string(),
            original_form: lower_form.to_string(),
            punct,
            case,
        }
    }
}

/// An ordered word sequence with one label pair per word.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LabeledSequence {
    pub tokens: Vec<LabeledToken>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn lower_words(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.lower_form.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CorpusError {
    /// Input contained no words after whitespace normalization.
    EmptyInput,
    /// Fewer documents than splits to fill.
    InsufficientData { documents: usize, required: usize },
    /// Split ratios do not sum to one.
    InvalidRatios,
}

impl fmt::Display for CorpusError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorpusError::EmptyInput => f.write_str("input is empty after normalization"),
            CorpusError::InsufficientData {
                documents,
                required,
            } => write!(
                f,
                "need at least {required} documents to split, got {documents}"
            ),
            CorpusError::InvalidRatios => f.write_str("split ratios must sum to 1"),
        }
    }
}

impl core::error::Error for CorpusError {}

/// Result of [`derive_labels`]: the sequence plus a count of marks that had
/// no word to attach to (leading punctuation) and were dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Derivation {
    pub sequence: LabeledSequence,
    pub dropped_marks: usize,
}

/// Recognizes PHI placeholder tags. The default accepts `[NAME]`-style tags:
/// brackets around one or more uppercase letters or underscores.
pub fn default_phi_tag(word: &str) -> bool {
    let bytes = word.as_bytes();
    bytes.len() > 2
        && bytes[0] == b'['
        && bytes[bytes.len() - 1] == b']'
        && bytes[1..bytes.len() - 1]
            .iter()
            .all(|&b| b.is_ascii_uppercase() || b == b'_')
}

/// Derives per-word `(punct, case)` labels from raw punctuated text using the
/// built-in PHI tag pattern.
pub fn derive_labels(text: &str) -> Result<Derivation, CorpusError> {
    derive_labels_with(text, &default_phi_tag)
}

/// [`derive_labels`] with a caller-supplied PHI tag recognizer. The
/// recognizer sees each whitespace-delimited token with trailing marks
/// already removed.
pub fn derive_labels_with(
    text: &str,
    is_phi_tag: &dyn Fn(&str) -> bool,
) -> Result<Derivation, CorpusError> {
    let mut tokens: Vec<LabeledToken> = Vec::new();
    let mut dropped = 0usize;

    // Attach a mark to the most recent word, or drop it if there is none.
    fn attach(tokens: &mut [LabeledToken], dropped: &mut usize, label: PunctLabel) {
        match tokens.last_mut() {
            Some(tok) => tok.punct = tok.punct.merge(label),
            None => *dropped += 1,
        }
    }

    for raw in text.split_whitespace() {
        // PHI tags pass through as single tokens; only trailing marks peel off.
        let trimmed = raw.trim_end_matches(['.', ',', '?']);
        if !trimmed.is_empty() && is_phi_tag(trimmed) {
            tokens.push(LabeledToken {
                lower_form: trimmed.to_lowercase(),
                original_form: trimmed.to_string(),
                punct: PunctLabel::NoPunct,
                case: CaseLabel::LowerCase,
            });
            for mark in raw[trimmed.len()..].chars() {
                if let Some(label) = mark_label(mark) {
                    attach(&mut tokens, &mut dropped, label);
                }
            }
            continue;
        }

        let mut word = String::new();
        for c in raw.chars() {
            if let Some(label) = mark_label(c) {
                flush_word(&mut tokens, &mut word);
                attach(&mut tokens, &mut dropped, label);
            } else if c.is_alphanumeric() || c == '-' || c == '\'' {
                word.push(c);
            }
            // Any other symbol is stripped.
        }
        flush_word(&mut tokens, &mut word);
    }

    if tokens.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    Ok(Derivation {
        sequence: LabeledSequence { tokens },
        dropped_marks: dropped,
    })
}

fn mark_label(c: char) -> Option<PunctLabel> {
    match c {
        '.' => Some(PunctLabel::Period),
        ',' => Some(PunctLabel::Comma),
        '?' => Some(PunctLabel::QuestionMark),
        _ => None,
    }
}

fn flush_word(tokens: &mut Vec<LabeledToken>, word: &mut String) {
    if word.is_empty() {
        return;
    }
    let case = derive_case(word);
    tokens.push(LabeledToken {
        lower_form: word.to_lowercase(),
        original_form: core::mem::take(word),
        punct: PunctLabel::NoPunct,
        case,
    });
}

/// Case label of a surface form, judged over its letters only. Digit-only and
/// symbol-only words are lowercase; a lone uppercase letter counts as
/// `UpperCase` rather than `AllCaps`.
pub fn derive_case(word: &str) -> CaseLabel {
    let letters: Vec<char> = word.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() {
        return CaseLabel::LowerCase;
    }
    let all_lower = letters.iter().all(|c| c.is_lowercase());
    if all_lower {
        return CaseLabel::LowerCase;
    }
    let all_upper = letters.iter().all(|c| c.is_uppercase());
    if all_upper {
        return if letters.len() >= 2 {
            CaseLabel::AllCaps
        } else {
            CaseLabel::UpperCase
        };
    }
    if letters[0].is_uppercase() && letters[1..].iter().all(|c| c.is_lowercase()) {
        return CaseLabel::UpperCase;
    }
    CaseLabel::MixedCase
}

/// Most frequent mixed-case surface form per lowercase key.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MixedCaseLexicon {
    entries: BTreeMap<String, BTreeMap<String, u64>>,
}

impl MixedCaseLexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Collects every `MixedCase` token in the sequences.
    pub fn build(sequences: &[LabeledSequence]) -> Self {
        let mut lex = MixedCaseLexicon::new();
        for seq in sequences {
            for tok in &seq.tokens {
                if tok.case == CaseLabel::MixedCase {
                    lex.observe(&tok.lower_form, &tok.original_form);
                }
            }
        }
        lex
    }

    /// Derives labels for each text and collects its mixed-case forms.
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut lex = MixedCaseLexicon::new();
        for text in texts {
            if let Ok(derived) = derive_labels(text) {
                for tok in &derived.sequence.tokens {
                    if tok.case == CaseLabel::MixedCase {
                        lex.observe(&tok.lower_form, &tok.original_form);
                    }
                }
            }
        }
        lex
    }

    pub fn observe(&mut self, lower: &str, surface: &str) {
        debug_assert_eq!(surface.to_lowercase(), lower);
        *self
            .entries
            .entry(lower.to_string())
            .or_default()
            .entry(surface.to_string())
            .or_insert(0) += 1;
    }

    pub fn insert_with_count(&mut self, lower: &str, surface: &str, count: u64) {
        *self
            .entries
            .entry(lower.to_string())
            .or_default()
            .entry(surface.to_string())
            .or_insert(0) += count;
    }

    /// Most frequent surface for a lowercase key; frequency ties break toward
    /// the lexicographically smaller surface.
    pub fn lookup(&self, lower: &str) -> Option<&str> {
        let forms = self.entries.get(lower)?;
        forms
            .iter()
            .max_by(|(fa, ca), (fb, cb)| ca.cmp(cb).then_with(|| fb.cmp(fa)))
            .map(|(form, _)| form.as_str())
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    /// `(lower, best surface, count of that surface)` in key order.
    pub fn iter_best(&self) -> impl Iterator<Item = (&str, &str, u64)> {
        self.entries.iter().filter_map(|(lower, forms)| {
            forms
                .iter()
                .max_by(|(fa, ca), (fb, cb)| ca.cmp(cb).then_with(|| fb.cmp(fa)))
                .map(|(form, count)| (lower.as_str(), form.as_str(), *count))
        })
    }
}

/// Renders a labeled sequence back to surface text: case is reconstructed
/// from the case label (mixed case via the lexicon, falling back to the
/// token's remembered surface form) and marks are appended per punct label.
pub fn realize(seq: &LabeledSequence, lexicon: &MixedCaseLexicon) -> String {
    let mut out = String::new();
    for tok in &seq.tokens {
        if !out.is_empty() {
            out.push(' ');
        }
        match tok.case {
            CaseLabel::LowerCase => out.push_str(&tok.lower_form),
            CaseLabel::UpperCase => {
                let mut chars = tok.lower_form.chars();
                if let Some(first) = chars.next() {
                    out.extend(first.to_uppercase());
                    out.push_str(chars.as_str());
                }
            }
            CaseLabel::AllCaps => out.push_str(&tok.lower_form.to_uppercase()),
            CaseLabel::MixedCase => {
                if let Some(surface) = lexicon.lookup(&tok.lower_form) {
                    out.push_str(surface);
                } else if tok.original_form.to_lowercase() == tok.lower_form
                    && tok.original_form != tok.lower_form
                {
                    out.push_str(&tok.original_form);
                } else {
                    out.push_str(&tok.lower_form);
                }
            }
        }
        if let Some(mark) = tok.punct.mark() {
            out.push(mark);
        }
    }
    out
}

/// Document-id partition produced by [`split_corpus`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

/// Deterministic shuffled partition of document ids. Ratios must sum to one;
/// every split receives at least one document, which is why at least three
/// are required.
pub fn split_corpus(
    doc_ids: &[String],
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<CorpusSplit, CorpusError> {
    let (r_train, r_dev, r_test) = ratios;
    if libm::fabs(r_train + r_dev + r_test - 1.0) > 1e-9
        || r_train < 0.0
        || r_dev < 0.0
        || r_test < 0.0
    {
        return Err(CorpusError::InvalidRatios);
    }
    let n = doc_ids.len();
    if n < 3 {
        return Err(CorpusError::InsufficientData {
            documents: n,
            required: 3,
        });
    }

    // Pure function of (ids, ratios, seed): sort before the seeded shuffle so
    // caller-side ordering cannot leak into the partition.
    let mut ids: Vec<String> = doc_ids.to_vec();
    ids.sort_unstable();
    let mut rng = Rng::seed(seed);
    rng.shuffle(&mut ids);

    let mut n_dev = libm::round(r_dev * n as f64) as usize;
    let mut n_test = libm::round(r_test * n as f64) as usize;
    n_dev = n_dev.clamp(1, n - 2);
    n_test = n_test.clamp(1, n - 1 - n_dev);
    let n_train = n - n_dev - n_test;

    let mut iter = ids.into_iter();
    let train: Vec<String> = iter.by_ref().take(n_train).collect();
    let dev: Vec<String> = iter.by_ref().take(n_dev).collect();
    let test: Vec<String> = iter.collect();
    Ok(CorpusSplit {
        train,
        dev,
        test,
        seed,
    })
}
