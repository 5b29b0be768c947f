//! Word-level per-class precision / recall / F1 for both tasks.
//!
//! Scoring is one-vs-rest per class over all words, with the no-punctuation
//! class scored like any other. Classes absent from both gold and predictions
//! stay in the report with zero support rather than disappearing, but do not
//! enter the macro average.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{CaseLabel, LabeledSequence, PunctLabel, CASE_CLASSES, PUNCT_CLASSES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    /// Word counts differ; run alignment-based restoration first.
    AlignmentRequired {
        sequence: usize,
        predicted: usize,
        gold: usize,
    },
    /// Different numbers of sequences.
    SequenceCountMismatch {
        predicted: usize,
        gold: usize,
    },
    EmptyEvaluation,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalError::AlignmentRequired { sequence, predicted, gold } => write!(
                f,
                "sequence {sequence}: {predicted} predicted vs {gold} gold words; align and restore labels before scoring"
            ),
            EvalError::SequenceCountMismatch { predicted, gold } => {
                write!(f, "{predicted} predicted sequences vs {gold} gold")
            }
            EvalError::EmptyEvaluation => f.write_str("nothing to evaluate"),
        }
    }
}

impl core::error::Error for EvalError {}

/// Confusion counts for a single task, indexed by class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCounts {
    true_pos: Vec<u64>,
    false_pos: Vec<u64>,
    false_neg: Vec<u64>,
}

impl ClassCounts {
    pub fn new(classes: usize) -> Self {
        ClassCounts {
            true_pos: vec![0; classes],
            false_pos: vec![0; classes],
            false_neg: vec![0; classes],
        }
    }

    pub fn record(&mut self, gold: usize, predicted: usize) {
        if gold == predicted {
            self.true_pos[gold] += 1;
        } else {
            self.false_neg[gold] += 1;
            self.false_pos[predicted] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.true_pos.iter().sum::<u64>() + self.false_neg.iter().sum::<u64>()
    }

    fn f1(&self, class: usize) -> f64 {
        let (p, r) = (self.precision(class), self.recall(class));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    fn precision(&self, class: usize) -> f64 {
        let denom = self.true_pos[class] + self.false_pos[class];
        if denom == 0 {
            0.0
        } else {
            self.true_pos[class] as f64 / denom as f64
        }
    }

    fn recall(&self, class: usize) -> f64 {
        let denom = self.true_pos[class] + self.false_neg[class];
        if denom == 0 {
            0.0
        } else {
            self.true_pos[class] as f64 / denom as f64
        }
    }

    /// Mean F1 over classes that occur in gold or predictions.
    pub fn macro_f1(&self) -> f64 {
        let mut sum = 0.0;
        let mut n = 0usize;
        for class in 0..self.true_pos.len() {
            let seen = self.true_pos[class] + self.false_pos[class] + self.false_neg[class];
            if seen > 0 {
                sum += self.f1(class);
                n += 1;
            }
        }
        if n == 0 {
            0.0
        } else {
            sum / n as f64
        }
    }
}

/// Metrics for one class of one task.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassMetrics {
    pub class: String,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Per-class metrics for one task, in the conventional reporting order.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassReport {
    pub task: String,
    pub classes: Vec<ClassMetrics>,
    pub macro_f1: f64,
}

impl ClassReport {
    fn from_counts(task: &str, counts: &ClassCounts, order: &[usize], names: &[String]) -> Self {
        let classes = order
            .iter()
            .map(|&class| ClassMetrics {
                class: names[class].clone(),
                true_pos: counts.true_pos[class],
                false_pos: counts.false_pos[class],
                false_neg: counts.false_neg[class],
                support: counts.true_pos[class] + counts.false_neg[class],
                precision: counts.precision(class),
                recall: counts.recall(class),
                f1: counts.f1(class),
            })
            .collect();
        ClassReport {
            task: task.to_string(),
            classes,
            macro_f1: counts.macro_f1(),
        }
    }
}

/// Scores predictions against gold at word level. Sequences must pair up
/// word-for-word; mismatched lengths need alignment-based restoration first.
pub fn score(
    predicted: &[LabeledSequence],
    gold: &[LabeledSequence],
) -> Result<(ClassReport, ClassReport), EvalError> {
    if predicted.len() != gold.len() {
        return Err(EvalError::SequenceCountMismatch {
            predicted: predicted.len(),
            gold: gold.len(),
        });
    }
    let mut punct = ClassCounts::new(PUNCT_CLASSES);
    let mut case = ClassCounts::new(CASE_CLASSES);
    let mut words = 0u64;
    for (i, (p_seq, g_seq)) in predicted.iter().zip(gold).enumerate() {
        if p_seq.len() != g_seq.len() {
            return Err(EvalError::AlignmentRequired {
                sequence: i,
                predicted: p_seq.len(),
                gold: g_seq.len(),
            });
        }
        for (p, g) in p_seq.tokens.iter().zip(&g_seq.tokens) {
            punct.record(g.punct.index(), p.punct.index());
            case.record(g.case.index(), p.case.index());
            words += 1;
        }
    }
    if words == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok((punct_report(&punct), case_report(&case)))
}

/// Builds the punctuation report in table order (no punct, period, comma,
/// question mark).
pub fn punct_report(counts: &ClassCounts) -> ClassReport {
    let names: Vec<String> = PunctLabel::ALL.iter().map(|l| l.to_string()).collect();
    let order = [
        PunctLabel::NoPunct.index(),
        PunctLabel::Period.index(),
        PunctLabel::Comma.index(),
        PunctLabel::QuestionMark.index(),
    ];
    ClassReport::from_counts("punctuation", counts, &order, &names)
}

/// Builds the casing report in table order (lower, upper, all caps, mixed).
pub fn case_report(counts: &ClassCounts) -> ClassReport {
    let names: Vec<String> = CaseLabel::ALL.iter().map(|l| l.to_string()).collect();
    let order = [0, 1, 2, 3];
    ClassReport::from_counts("truecasing", counts, &order, &names)
}

/// Tab-separated rendering with two-decimal display rounding. Full-precision
/// numbers belong in the JSON rendering, which the CLI layer owns.
pub fn render_tsv(reports: &[&ClassReport]) -> String {
    let mut out = String::from("task\tclass\tsupport\tprecision\trecall\tf1\n");
    for report in reports {
        for class in &report.classes {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.2}\t{:.2}\t{:.2}\n",
                report.task, class.class, class.support, class.precision, class.recall, class.f1
            ));
        }
        out.push_str(&format!(
            "{}\tmacro\t\t\t\t{:.2}\n",
            report.task, report.macro_f1
        ));
    }
    out
}
