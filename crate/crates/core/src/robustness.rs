//! ASR robustness tooling: word-level edit-distance alignment between
//! references and hypotheses, transfer of punctuation and casing labels onto
//! hypotheses, WER-based corpus filtering and splitting, and n-best
//! training-set augmentation.
//!
//! References must be stripped of punctuation and lowercased before
//! alignment; a [`LabeledSequence`]'s lower forms are already in that shape.
//! When a punctuated reference word is deleted from the hypothesis, its mark
//! moves to the most recent hypothesis word, colliding marks resolved by the
//! same precedence rule the corpus module uses. Casing transfers only when
//! the hypothesis word is found verbatim near its aligned reference position;
//! everything else defaults to lowercase.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{CaseLabel, LabeledSequence, LabeledToken, PunctLabel};

/// One step of the edit trace between reference and hypothesis words.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EditOp {
    Match {
        ref_index: usize,
        hyp_index: usize,
    },
    Substitute {
        ref_index: usize,
        hyp_index: usize,
    },
    /// Hypothesis word with no reference counterpart.
    Insert {
        hyp_index: usize,
    },
    /// Reference word missing from the hypothesis.
    Delete {
        ref_index: usize,
    },
}

/// Minimum-cost word alignment plus its error statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WordAlignment {
    pub ops: Vec<EditOp>,
    /// Substitutions + deletions + insertions.
    pub distance: usize,
    /// `distance / reference length`.
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AlignError {
    /// WER is undefined for an empty reference.
    EmptyReference,
    /// Not enough transcripts survive filtering to fill the requested splits.
    InsufficientData { surviving: usize, required: usize },
}

impl fmt::Display for AlignError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlignError::EmptyReference => f.write_str("empty reference: WER is undefined"),
            AlignError::InsufficientData {
                surviving,
                required,
            } => write!(
                f,
                "only {surviving} transcripts survive the WER filter, {required} required"
            ),
        }
    }
}

impl core::error::Error for AlignError {}

/// Unit-cost Levenshtein alignment over words. The backtrace prefers the
/// diagonal (match/substitute), then deletion, then insertion, making the
/// trace deterministic.
pub fn align<S: AsRef<str>, T: AsRef<str>>(
    ref_words: &[S],
    hyp_words: &[T],
) -> Result<WordAlignment, AlignError> {
    let r = ref_words.len();
    let h = hyp_words.len();
    if r == 0 {
        return Err(AlignError::EmptyReference);
    }

    // dist[i][j]: distance between ref[..i] and hyp[..j].
    let mut dist = vec![vec![0usize; h + 1]; r + 1];
    for (i, row) in dist.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=h {
        dist[0][j] = j;
    }
    for i in 1..=r {
        for j in 1..=h {
            let cost = usize::from(ref_words[i - 1].as_ref() != hyp_words[j - 1].as_ref());
            dist[i][j] = (dist[i - 1][j - 1] + cost)
                .min(dist[i - 1][j] + 1)
                .min(dist[i][j - 1] + 1);
        }
    }

    let mut ops = Vec::with_capacity(r.max(h));
    let (mut i, mut j) = (r, h);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let cost = usize::from(ref_words[i - 1].as_ref() != hyp_words[j - 1].as_ref());
            if dist[i][j] == dist[i - 1][j - 1] + cost {
                ops.push(if cost == 0 {
                    EditOp::Match {
                        ref_index: i - 1,
                        hyp_index: j - 1,
                    }
                } else {
                    EditOp::Substitute {
                        ref_index: i - 1,
                        hyp_index: j - 1,
                    }
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && dist[i][j] == dist[i - 1][j] + 1 {
            ops.push(EditOp::Delete { ref_index: i - 1 });
            i -= 1;
            continue;
        }
        ops.push(EditOp::Insert { hyp_index: j - 1 });
        j -= 1;
    }
    ops.reverse();

    let distance = dist[r][h];
    Ok(WordAlignment {
        ops,
        distance,
        wer: distance as f64 / r as f64,
    })
}

/// Result of transferring reference labels onto a hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RestoredPunct {
    pub labels: Vec<PunctLabel>,
    /// Marks on deleted reference words with no preceding hypothesis word.
    pub dropped_marks: usize,
}

/// Transfers punctuation labels along the alignment. Matched and substituted
/// hypothesis words inherit the reference label; insertions get no mark;
/// marks on deleted reference words attach to the most recent hypothesis
/// word, merging collisions by precedence.
pub fn restore_punct(
    reference: &LabeledSequence,
    alignment: &WordAlignment,
    hyp_len: usize,
) -> RestoredPunct {
    let mut labels = vec![PunctLabel::NoPunct; hyp_len];
    let mut last_hyp: Option<usize> = None;
    let mut dropped = 0usize;
    for op in &alignment.ops {
        match *op {
            EditOp::Match {
                ref_index,
                hyp_index,
            }
            | EditOp::Substitute {
                ref_index,
                hyp_index,
            } => {
                labels[hyp_index] = reference.tokens[ref_index].punct;
                last_hyp = Some(hyp_index);
            }
            EditOp::Insert { hyp_index } => {
                labels[hyp_index] = PunctLabel::NoPunct;
                last_hyp = Some(hyp_index);
            }
            EditOp::Delete { ref_index } => {
                let mark = reference.tokens[ref_index].punct;
                if mark != PunctLabel::NoPunct {
                    match last_hyp {
                        Some(h) => labels[h] = labels[h].merge(mark),
                        None => dropped += 1,
                    }
                }
            }
        }
    }
    RestoredPunct {
        labels,
        dropped_marks: dropped,
    }
}

/// Transfers casing labels: each hypothesis word searches the reference
/// window of two words either side of its aligned position for an exact
/// lowercase match and copies that word's label, else stays lowercase.
/// Insertions anchor at the nearest aligned hypothesis neighbour.
pub fn restore_case<S: AsRef<str>>(
    reference: &LabeledSequence,
    alignment: &WordAlignment,
    hyp_words: &[S],
) -> Vec<CaseLabel> {
    const HALF_WINDOW: usize = 2; // window of 5: anchor plus 2 either side

    let hyp_len = hyp_words.len();
    let mut anchor: Vec<Option<usize>> = vec![None; hyp_len];
    for op in &alignment.ops {
        if let EditOp::Match {
            ref_index,
            hyp_index,
        }
        | EditOp::Substitute {
            ref_index,
            hyp_index,
        } = *op
        {
            anchor[hyp_index] = Some(ref_index);
        }
    }
    // Inserted words borrow the nearest aligned neighbour's anchor; ties
    // prefer the left side.
    let resolved: Vec<Option<usize>> = (0..hyp_len)
        .map(|i| {
            if anchor[i].is_some() {
                return anchor[i];
            }
            for offset in 1..hyp_len {
                if offset <= i {
                    if let Some(r) = anchor[i - offset] {
                        return Some(r);
                    }
                }
                if i + offset < hyp_len {
                    if let Some(r) = anchor[i + offset] {
                        return Some(r);
                    }
                }
            }
            None
        })
        .collect();

    hyp_words
        .iter()
        .enumerate()
        .map(|(i, word)| {
            let Some(center) = resolved[i] else {
                return CaseLabel::LowerCase;
            };
            let lo = center.saturating_sub(HALF_WINDOW);
            let hi = (center + HALF_WINDOW).min(reference.len().saturating_sub(1));
            // Nearest match wins; equal offsets prefer the left.
            let mut best: Option<(usize, usize)> = None; // (offset, position)
            for pos in lo..=hi {
                if reference.tokens[pos].lower_form == word.as_ref() {
                    let offset = pos.abs_diff(center);
                    let better = match best {
                        None => true,
                        Some((bo, bp)) => offset < bo || (offset == bo && pos < bp),
                    };
                    if better {
                        best = Some((offset, pos));
                    }
                }
            }
            match best {
                Some((_, pos)) => reference.tokens[pos].case,
                None => CaseLabel::LowerCase,
            }
        })
        .collect()
}

/// Aligns a hypothesis against a labeled reference and restores both label
/// kinds, yielding a labeled hypothesis sequence.
pub fn restore_labels<S: AsRef<str>>(
    reference: &LabeledSequence,
    hyp_words: &[S],
) -> Result<(LabeledSequence, WordAlignment, usize), AlignError> {
    let ref_words = reference.lower_words();
    let alignment = align(&ref_words, hyp_words)?;
    let punct = restore_punct(reference, &alignment, hyp_words.len());
    let case = restore_case(reference, &alignment, hyp_words);
    let tokens = hyp_words
        .iter()
        .zip(punct.labels.iter().zip(&case))
        .map(|(w, (&p, &c))| LabeledToken::new(w.as_ref(), p, c))
        .collect();
    Ok((LabeledSequence { tokens }, alignment, punct.dropped_marks))
}

/// A transcript id with its measured WER, the unit [`wer_filter_split`]
/// partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredTranscript {
    pub id: String,
    pub wer: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WerSplit {
    pub train: Vec<ScoredTranscript>,
    pub dev: Vec<ScoredTranscript>,
    pub test: Vec<ScoredTranscript>,
    pub discarded: Vec<ScoredTranscript>,
}

/// Discards transcripts above the WER threshold, sorts the survivors by
/// ascending WER (ties by id), and deals the best `test_n` to test, the next
/// `dev_n` to dev, and the remainder to train.
pub fn wer_filter_split(
    transcripts: &[ScoredTranscript],
    threshold: f64,
    test_n: usize,
    dev_n: usize,
) -> Result<WerSplit, AlignError> {
    let mut surviving: Vec<ScoredTranscript> = Vec::new();
    let mut discarded = Vec::new();
    for t in transcripts {
        if t.wer > threshold {
            discarded.push(t.clone());
        } else {
            surviving.push(t.clone());
        }
    }
    if surviving.len() < test_n + dev_n {
        return Err(AlignError::InsufficientData {
            surviving: surviving.len(),
            required: test_n + dev_n,
        });
    }
    surviving.sort_by(|a, b| a.wer.total_cmp(&b.wer).then_with(|| a.id.cmp(&b.id)));
    let train = surviving.split_off(test_n + dev_n);
    let dev = surviving.split_off(test_n);
    Ok(WerSplit {
        train,
        dev,
        test: surviving,
        discarded,
    })
}

/// Where an augmented training sequence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    GroundTruth,
    /// Restored ASR hypothesis at this n-best rank (1 = primary).
    AsrRank(usize),
}

/// One utterance's ranked hypotheses. Rank 1 is the primary hypothesis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NBestList {
    pub utterance_id: String,
    /// Hypotheses in rank order; index 0 is rank 1.
    pub hypotheses: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedSequence {
    pub utterance_id: String,
    pub sequence: LabeledSequence,
    pub provenance: Provenance,
}

/// Builds the augmented training set: every ground-truth sequence, plus the
/// top `n` hypotheses of its n-best list restored via alignment. Hypotheses
/// and ground truth enter as independent, equally weighted sequences.
pub fn augment_nbest(
    ground_truth: &[(String, LabeledSequence)],
    nbest: &[NBestList],
    n: usize,
) -> Result<Vec<AugmentedSequence>, AlignError> {
    let mut out = Vec::new();
    for (utt_id, reference) in ground_truth {
        out.push(AugmentedSequence {
            utterance_id: utt_id.clone(),
            sequence: reference.clone(),
            provenance: Provenance::GroundTruth,
        });
        if n == 0 {
            continue;
        }
        let Some(list) = nbest.iter().find(|l| &l.utterance_id == utt_id) else {
            continue;
        };
        for (rank_idx, hyp) in list.hypotheses.iter().take(n).enumerate() {
            if hyp.is_empty() {
                continue;
            }
            let (sequence, _, _) = restore_labels(reference, hyp)?;
            out.push(AugmentedSequence {
                utterance_id: utt_id.clone(),
                sequence,
                provenance: Provenance::AsrRank(rank_idx + 1),
            });
        }
    }
    Ok(out)
}
