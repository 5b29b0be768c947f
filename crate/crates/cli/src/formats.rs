//! On-disk formats: the labeled-corpus and hypothesis JSON-lines files, the
//! lexicon TSV, vocabulary files, per-word label TSVs, metrics logs and
//! evaluation reports.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use puncase_core::corpus::{
    CaseLabel, LabeledSequence, LabeledToken, MixedCaseLexicon, PunctLabel,
};
use puncase_core::evaluation::ClassReport;
use puncase_core::robustness::Provenance;
use puncase_core::tokenizer::Vocabulary;
use puncase_core::training::StepMetrics;

/// One labeled sequence per line: parallel `words` / `punct` / `case` /
/// `original` columns plus optional identity and provenance fields.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CorpusRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    pub words: Vec<String>,
    pub punct: Vec<String>,
    pub case: Vec<String>,
    pub original: Vec<String>,
    /// `gt` or `asr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
}

impl CorpusRecord {
    pub fn from_sequence(id: Option<String>, seq: &LabeledSequence) -> Self {
        CorpusRecord {
            id,
            style: None,
            words: seq.tokens.iter().map(|t| t.lower_form.clone()).collect(),
            punct: seq.tokens.iter().map(|t| t.punct.to_string()).collect(),
            case: seq.tokens.iter().map(|t| t.case.to_string()).collect(),
            original: seq.tokens.iter().map(|t| t.original_form.clone()).collect(),
            source: None,
            rank: None,
        }
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        match provenance {
            Provenance::GroundTruth => {
                self.source = Some("gt".to_string());
                self.rank = None;
            }
            Provenance::AsrRank(rank) => {
                self.source = Some("asr".to_string());
                self.rank = Some(rank);
            }
        }
        self
    }

    pub fn to_sequence(&self) -> Result<LabeledSequence> {
        let n = self.words.len();
        if self.punct.len() != n || self.case.len() != n || self.original.len() != n {
            bail!(
                "corpus record{}: words/punct/case/original lengths differ",
                self.id
                    .as_deref()
                    .map(|i| format!(" {i}"))
                    .unwrap_or_default()
            );
        }
        let tokens = self
            .words
            .iter()
            .zip(self.punct.iter().zip(self.case.iter().zip(&self.original)))
            .map(|(word, (punct, (case, original)))| {
                Ok(LabeledToken {
                    lower_form: word.clone(),
                    original_form: original.clone(),
                    punct: PunctLabel::from_str(punct)
                        .map_err(|_| anyhow::anyhow!("unknown punct label {punct:?}"))?,
                    case: CaseLabel::from_str(case)
                        .map_err(|_| anyhow::anyhow!("unknown case label {case:?}"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LabeledSequence { tokens })
    }
}

/// Raw input document for `prepare` when given JSON-lines instead of plain
/// text files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
}

/// One ASR hypothesis per line.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub utt_id: String,
    pub rank: usize,
    pub words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wer: Option<f64>,
}

/// Transcript-level WER row consumed by `wer-split`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoredRecord {
    pub id: String,
    pub wer: f64,
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed record", path.display(), lineno + 1))?;
        out.push(record);
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    let mut writer = BufWriter::new(file);
    for record in records {
        serde_json::to_writer(&mut writer, record)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<(Option<String>, LabeledSequence)>> {
    let records: Vec<CorpusRecord> = read_jsonl(path)?;
    records
        .iter()
        .map(|r| Ok((r.id.clone(), r.to_sequence()?)))
        .collect()
}

/// Lexicon TSV: `lower<TAB>surface<TAB>count`, one row per key.
pub fn write_lexicon(path: &Path, lexicon: &MixedCaseLexicon) -> Result<()> {
    let mut out = String::new();
    for (lower, surface, count) in lexicon.iter_best() {
        out.push_str(&format!("{lower}\t{surface}\t{count}\n"));
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_lexicon(path: &Path) -> Result<MixedCaseLexicon> {
    let content =
        fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut lexicon = MixedCaseLexicon::new();
    for (lineno, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (lower, surface, count) = (parts.next(), parts.next(), parts.next());
        match (lower, surface, count) {
            (Some(lower), Some(surface), Some(count)) => {
                if surface.to_lowercase() != lower {
                    bail!(
                        "{}:{}: surface {surface:?} does not lowercase to key {lower:?}",
                        path.display(),
                        lineno + 1
                    );
                }
                let count: u64 = count
                    .parse()
                    .with_context(|| format!("{}:{}: bad count", path.display(), lineno + 1))?;
                lexicon.insert_with_count(lower, surface, count);
            }
            _ => bail!(
                "{}:{}: expected three tab-separated fields",
                path.display(),
                lineno + 1
            ),
        }
    }
    Ok(lexicon)
}

/// Vocabulary file: one piece per line, line number is the id, reserved
/// tokens first. Byte-exact across runs.
pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    fs::write(path, vocab_file_bytes(vocab))
        .with_context(|| format!("cannot write {}", path.display()))
}

pub fn vocab_file_bytes(vocab: &Vocabulary) -> Vec<u8> {
    let mut out = Vec::new();
    for piece in vocab.pieces() {
        out.extend_from_slice(piece.as_bytes());
        out.push(b'\n');
    }
    out
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary> {
    let content =
        fs::read_to_string(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut lines = content.lines();
    for expected in ["[PAD]", "[UNK]", "[MASK]", ".", ",", "?"] {
        match lines.next() {
            Some(line) if line == expected => {}
            other => bail!(
                "{}: expected reserved piece {expected:?}, found {other:?}",
                path.display()
            ),
        }
    }
    let vocab = Vocabulary::from_pieces(lines.map(String::from));
    Ok(vocab)
}

/// Per-word label TSV written next to predictions.
pub fn write_labels_tsv(path: &Path, seq: &LabeledSequence) -> Result<()> {
    let mut out = String::from("word\tpunct\tcase\n");
    for tok in &seq.tokens {
        out.push_str(&format!(
            "{}\t{}\t{}\n",
            tok.lower_form, tok.punct, tok.case
        ));
    }
    fs::write(path, out).with_context(|| format!("cannot write {}", path.display()))
}

/// Metrics log: one JSON object per optimizer step.
#[derive(Debug, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub step: u64,
    pub loss: f64,
    pub loss_p: Option<f64>,
    pub loss_c: Option<f64>,
}

pub fn write_metrics(path: &Path, steps: &[StepMetrics]) -> Result<()> {
    let records: Vec<MetricsRecord> = steps
        .iter()
        .map(|s| MetricsRecord {
            step: s.step,
            loss: s.loss,
            loss_p: s.loss_punct,
            loss_c: s.loss_case,
        })
        .collect();
    write_jsonl(path, &records)
}

/// JSON mirror of the evaluation report, full precision.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReportJson {
    pub tasks: Vec<TaskReportJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TaskReportJson {
    pub task: String,
    pub macro_f1: f64,
    pub classes: Vec<ClassReportJson>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ClassReportJson {
    pub class: String,
    pub support: u64,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn report_json(reports: &[&ClassReport]) -> ReportJson {
    ReportJson {
        tasks: reports
            .iter()
            .map(|report| TaskReportJson {
                task: report.task.clone(),
                macro_f1: report.macro_f1,
                classes: report
                    .classes
                    .iter()
                    .map(|c| ClassReportJson {
                        class: c.class.clone(),
                        support: c.support,
                        true_pos: c.true_pos,
                        false_pos: c.false_pos,
                        false_neg: c.false_neg,
                        precision: c.precision,
                        recall: c.recall,
                        f1: c.f1,
                    })
                    .collect(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use puncase_core::corpus::derive_labels;
    use puncase_core::tokenizer::train_subword;

    #[test]
    fn corpus_record_round_trip() {
        let seq = derive_labels("Is BiPAP on? Yes.").unwrap().sequence;
        let record = CorpusRecord::from_sequence(Some("u1".into()), &seq);
        let json = serde_json::to_string(&record).unwrap();
        let parsed: CorpusRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed.to_sequence().unwrap(), seq);
    }

    #[test]
    fn corpus_record_rejects_ragged_columns() {
        let record = CorpusRecord {
            id: None,
            style: None,
            words: vec!["a".into(), "b".into()],
            punct: vec!["no_punct".into()],
            case: vec!["lower_case".into(), "lower_case".into()],
            original: vec!["a".into(), "b".into()],
            source: None,
            rank: None,
        };
        assert!(record.to_sequence().is_err());
    }

    #[test]
    fn vocab_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        let vocab = train_subword(["alpha", "beta", "alphabet"], 80, 1).unwrap();
        write_vocab(&path, &vocab).unwrap();
        let loaded = read_vocab(&path).unwrap();
        assert_eq!(loaded, vocab);
        // Byte-exact on re-write.
        let bytes_a = std::fs::read(&path).unwrap();
        write_vocab(&path, &loaded).unwrap();
        assert_eq!(bytes_a, std::fs::read(&path).unwrap());
    }

    #[test]
    fn lexicon_tsv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.tsv");
        let mut lexicon = MixedCaseLexicon::new();
        lexicon.observe("bipap", "BiPAP");
        lexicon.observe("bipap", "BiPAP");
        lexicon.observe("ph", "pH");
        write_lexicon(&path, &lexicon).unwrap();
        let loaded = read_lexicon(&path).unwrap();
        assert_eq!(loaded.lookup("bipap"), Some("BiPAP"));
        assert_eq!(loaded.lookup("ph"), Some("pH"));
    }
}
