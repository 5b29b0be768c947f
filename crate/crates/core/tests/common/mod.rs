//! Shared fixtures for the integration suites: a synthetic labeled-corpus
//! generator with ASR-style corruption, and a full finite-difference gradient
//! checker.

#![allow(dead_code)]

use puncase_core::corpus::{
    CaseLabel, LabeledSequence, LabeledToken, MixedCaseLexicon, PunctLabel,
};
use puncase_core::model::ModelParameters;
use puncase_core::rng::Rng;

const COMMON_WORDS: &[&str] = &[
    "the",
    "patient",
    "was",
    "given",
    "and",
    "then",
    "blood",
    "pressure",
    "stable",
    "denies",
    "chest",
    "pain",
    "history",
    "of",
    "diabetes",
    "admitted",
    "for",
    "observation",
    "breathing",
    "comfortably",
    "on",
    "room",
    "air",
    "continue",
    "current",
    "medications",
    "follow",
    "up",
    "in",
    "two",
    "weeks",
    "no",
    "acute",
    "distress",
    "alert",
    "oriented",
    "daily",
    "dose",
    "morning",
    "evening",
    "started",
    "tolerated",
    "well",
    "without",
    "complications",
    "reviewed",
    "results",
    "today",
    "normal",
    "clear",
];

const NAMES: &[&str] = &["smith", "jones", "taylor", "miller", "wilson"];

const ACRONYMS: &[&str] = &["copd", "ekg", "bp", "icu", "er", "iv"];

const MIXED: &[(&str, &str)] = &[
    ("bipap", "BiPAP"),
    ("ph", "pH"),
    ("mchugh", "McHugh"),
    ("denovo", "DeNovo"),
];

const FILLERS: &[&str] = &["uh", "um", "ah", "so"];

/// Lexicon covering every mixed-case form the generator can emit.
pub fn fixture_lexicon() -> MixedCaseLexicon {
    let mut lex = MixedCaseLexicon::new();
    for (lower, surface) in MIXED {
        lex.observe(lower, surface);
    }
    lex
}

/// One synthetic sentence, 6..=14 words, with all four punctuation and case
/// classes reachable. Consistent with label derivation: realizing the
/// sequence and re-deriving labels reproduces it exactly.
pub fn gen_sentence(rng: &mut Rng) -> LabeledSequence {
    let len = 6 + rng.below(9);
    let mut tokens: Vec<LabeledToken> = (0..len)
        .map(|_| {
            let roll = rng.next_f64();
            if roll < 0.80 {
                LabeledToken::new(
                    COMMON_WORDS[rng.below(COMMON_WORDS.len())],
                    PunctLabel::NoPunct,
                    CaseLabel::LowerCase,
                )
            } else if roll < 0.88 {
                LabeledToken::new(
                    NAMES[rng.below(NAMES.len())],
                    PunctLabel::NoPunct,
                    CaseLabel::UpperCase,
                )
            } else if roll < 0.95 {
                LabeledToken::new(
                    ACRONYMS[rng.below(ACRONYMS.len())],
                    PunctLabel::NoPunct,
                    CaseLabel::AllCaps,
                )
            } else {
                let (lower, surface) = MIXED[rng.below(MIXED.len())];
                let mut tok = LabeledToken::new(lower, PunctLabel::NoPunct, CaseLabel::MixedCase);
                tok.original_form = surface.to_string();
                tok
            }
        })
        .collect();

    // Sentence-initial capitalization.
    if tokens[0].case == CaseLabel::LowerCase {
        tokens[0].case = CaseLabel::UpperCase;
    }
    // Terminal mark, mostly periods.
    let last = tokens.len() - 1;
    tokens[last].punct = if rng.next_f64() < 0.8 {
        PunctLabel::Period
    } else {
        PunctLabel::QuestionMark
    };
    // Up to two interior commas.
    for _ in 0..rng.below(3) {
        let pos = rng.below(last);
        tokens[pos].punct = PunctLabel::Comma;
    }
    LabeledSequence { tokens }
}

/// `count` synthetic sentences from one seed.
pub fn gen_corpus(count: usize, seed: u64) -> Vec<LabeledSequence> {
    let mut rng = Rng::seed(seed);
    (0..count).map(|_| gen_sentence(&mut rng)).collect()
}

/// Concatenates sentences into a single long sequence, as in a transcript.
pub fn gen_document(sentences: usize, rng: &mut Rng) -> LabeledSequence {
    let mut tokens = Vec::new();
    for _ in 0..sentences {
        tokens.extend(gen_sentence(rng).tokens);
    }
    LabeledSequence { tokens }
}

/// ASR-style corruption of a reference: substitutions by character noise,
/// deletions, and filler insertions. `severity` scales the error rates;
/// 1.0 is a plausible 1-best, higher ranks get noisier.
pub fn corrupt(reference: &LabeledSequence, severity: f64, rng: &mut Rng) -> Vec<String> {
    let mut hyp = Vec::new();
    for tok in &reference.tokens {
        let roll = rng.next_f64();
        if roll < 0.05 * severity {
            continue; // deletion
        }
        if roll < 0.13 * severity {
            hyp.push(mangle(&tok.lower_form, rng));
        } else {
            hyp.push(tok.lower_form.clone());
        }
        if rng.next_f64() < 0.04 * severity {
            hyp.push(FILLERS[rng.below(FILLERS.len())].to_string());
        }
    }
    if hyp.is_empty() {
        hyp.push(reference.tokens[0].lower_form.clone());
    }
    hyp
}

fn mangle(word: &str, rng: &mut Rng) -> String {
    let chars: Vec<char> = word.chars().collect();
    match rng.below(3) {
        0 if chars.len() > 2 => {
            // Drop one character.
            let drop = rng.below(chars.len());
            chars
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != drop)
                .map(|(_, c)| c)
                .collect()
        }
        1 if chars.len() > 2 => {
            // Swap two adjacent characters.
            let i = rng.below(chars.len() - 1);
            let mut out = chars.clone();
            out.swap(i, i + 1);
            out.into_iter().collect()
        }
        _ => {
            // Replace with a different common word.
            let mut other = COMMON_WORDS[rng.below(COMMON_WORDS.len())];
            while other == word {
                other = COMMON_WORDS[rng.below(COMMON_WORDS.len())];
            }
            other.to_string()
        }
    }
}

/// Worst observed tensor element in a gradient check.
#[derive(Debug)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_tensor: String,
    pub worst_index: usize,
    pub checked: usize,
}

/// Sweeps every element of every tensor, comparing analytic gradients with
/// central finite differences of `loss_of`. Elements where both sides vanish
/// below the floor pass trivially.
pub fn gradient_check<F: Fn(&ModelParameters) -> f64>(
    params: &mut ModelParameters,
    grads: &ModelParameters,
    loss_of: F,
    epsilon: f64,
) -> GradCheckReport {
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_tensor: String::new(),
        worst_index: 0,
        checked: 0,
    };
    for t in 0..params.tensor_count() {
        for i in 0..params.tensor(t).len() {
            let original = params.tensor(t)[i];
            params.tensor_mut(t)[i] = original + epsilon;
            let plus = loss_of(params);
            params.tensor_mut(t)[i] = original - epsilon;
            let minus = loss_of(params);
            params.tensor_mut(t)[i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = grads.tensor(t)[i];
            let abs_diff = (analytic - numeric).abs();
            let rel = if abs_diff < 1e-9 {
                0.0
            } else {
                abs_diff / analytic.abs().max(numeric.abs()).max(1e-8)
            };
            report.checked += 1;
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_tensor = params.tensor_name(t);
                report.worst_index = i;
            }
        }
    }
    report
}
