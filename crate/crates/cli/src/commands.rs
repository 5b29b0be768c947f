//! Subcommand implementations. Every command resolves its options from the
//! pipeline config plus flag overrides, hashes its inputs into a manifest,
//! and removes partial outputs when it fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;

use puncase_core::corpus::{self, LabeledSequence, MixedCaseLexicon};
use puncase_core::evaluation;
use puncase_core::inference::{self, ChunkOptions};
use puncase_core::model::ModelParameters;
use puncase_core::robustness::{self, NBestList, ScoredTranscript};
use puncase_core::tokenizer::{self, TokenizerMode, Vocabulary};
use puncase_core::training;

use crate::checkpoint;
use crate::config::{parse_mode, PipelineConfig};
use crate::formats::{self, CorpusRecord, DocumentRecord, HypothesisRecord, ScoredRecord};
use crate::manifest::{OutputGuard, RunManifest};

fn phi_matcher(config: &PipelineConfig, flag: Option<&str>) -> Result<Option<regex::Regex>> {
    let pattern = flag.or(config.phi_pattern.as_deref());
    match pattern {
        // Anchored: the tag pattern must cover the whole token.
        Some(p) => Ok(Some(
            regex::Regex::new(&format!("^(?:{p})$")).context("invalid PHI pattern")?,
        )),
        None => Ok(None),
    }
}

fn derive_with_phi(
    text: &str,
    phi: &Option<regex::Regex>,
) -> Result<corpus::Derivation, corpus::CorpusError> {
    match phi {
        Some(re) => corpus::derive_labels_with(text, &|word: &str| re.is_match(word)),
        None => corpus::derive_labels(text),
    }
}

/// Splits an over-long sequence at punctuation boundaries, falling back to a
/// hard cut when a window contains no mark.
fn segment_sequence(seq: LabeledSequence, max_words: usize) -> Vec<LabeledSequence> {
    if seq.len() <= max_words {
        return vec![seq];
    }
    let mut out = Vec::new();
    let tokens = seq.tokens;
    let mut start = 0;
    while start < tokens.len() {
        let limit = (start + max_words).min(tokens.len());
        let cut = if limit == tokens.len() {
            limit
        } else {
            (start..limit)
                .rev()
                .find(|&i| tokens[i].punct != corpus::PunctLabel::NoPunct)
                .map(|i| i + 1)
                .unwrap_or(limit)
        };
        out.push(LabeledSequence {
            tokens: tokens[start..cut].to_vec(),
        });
        start = cut;
    }
    out
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Text files, directories of .txt files, or .jsonl files of
    /// {id, text, style} records.
    #[arg(long, alias = "in", required = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Labeled corpus (JSON-lines) to write.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// Also write <output>.train/.dev/.test.jsonl split by document id.
    #[arg(long)]
    pub split: bool,
    /// Break documents into sequences of at most this many words, cutting at
    /// punctuation boundaries where possible.
    #[arg(long)]
    pub max_words: Option<usize>,
    /// Regex recognizing PHI placeholder tags (whole-token match).
    #[arg(long)]
    pub phi_pattern: Option<String>,
}

pub fn prepare(args: &PrepareArgs, config: &PipelineConfig) -> Result<()> {
    let phi = phi_matcher(config, args.phi_pattern.as_deref())?;

    let mut documents: Vec<DocumentRecord> = Vec::new();
    let mut input_files = Vec::new();
    for input in &args.input {
        if input.is_dir() {
            let mut entries: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("cannot read {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            entries.sort();
            for path in entries {
                documents.push(read_text_document(&path)?);
                input_files.push(path);
            }
        } else if input.extension().is_some_and(|e| e == "jsonl") {
            documents.extend(formats::read_jsonl::<DocumentRecord>(input)?);
            input_files.push(input.clone());
        } else {
            documents.push(read_text_document(input)?);
            input_files.push(input.clone());
        }
    }
    if documents.is_empty() {
        bail!("no input documents found");
    }

    let mut records = Vec::new();
    let mut dropped_marks = 0usize;
    let mut skipped_empty = 0usize;
    for doc in &documents {
        let derived = match derive_with_phi(&doc.text, &phi) {
            Ok(d) => d,
            Err(corpus::CorpusError::EmptyInput) => {
                skipped_empty += 1;
                continue;
            }
            Err(e) => return Err(e.into()),
        };
        dropped_marks += derived.dropped_marks;
        let segments = match args.max_words {
            Some(max) => segment_sequence(derived.sequence, max.max(1)),
            None => vec![derived.sequence],
        };
        let multi = segments.len() > 1;
        for (k, seq) in segments.into_iter().enumerate() {
            let id = if multi {
                format!("{}#{k}", doc.id)
            } else {
                doc.id.clone()
            };
            let mut record = CorpusRecord::from_sequence(Some(id), &seq);
            record.style = doc.style.clone();
            records.push(record);
        }
    }
    if records.is_empty() {
        bail!("all {skipped_empty} input documents were empty after normalization");
    }
    if dropped_marks > 0 {
        eprintln!(
            "warning: dropped {dropped_marks} leading punctuation marks with no word to attach to"
        );
    }
    if skipped_empty > 0 {
        eprintln!("warning: skipped {skipped_empty} empty documents");
    }

    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    formats::write_jsonl(&args.output, &records)?;

    let mut manifest = RunManifest::new("prepare", config);
    for path in &input_files {
        manifest.record_input(path)?;
    }
    manifest.record_output(&args.output);

    if args.split {
        let doc_ids: Vec<String> = {
            let mut seen = BTreeMap::new();
            for doc in &documents {
                seen.entry(doc.id.clone()).or_insert(());
            }
            seen.into_keys().collect()
        };
        let split = corpus::split_corpus(&doc_ids, config.split_ratios, config.seed)?;
        for (name, ids) in [
            ("train", &split.train),
            ("dev", &split.dev),
            ("test", &split.test),
        ] {
            let path = sibling(&args.output, name)?;
            let subset: Vec<&CorpusRecord> = records
                .iter()
                .filter(|r| {
                    let id = r.id.as_deref().unwrap_or_default();
                    let doc = id.split('#').next().unwrap_or(id);
                    ids.iter().any(|i| i == doc)
                })
                .collect();
            guard.declare(&path);
            formats::write_jsonl(&path, &subset)?;
            manifest.record_output(&path);
        }
    }

    let manifest_path = manifest.write_beside(&args.output)?;
    guard.declare(&manifest_path);
    guard.commit();
    println!(
        "prepared {} sequences from {} documents",
        records.len(),
        documents.len()
    );
    Ok(())
}

fn read_text_document(path: &Path) -> Result<DocumentRecord> {
    let text =
        fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(DocumentRecord {
        id,
        text,
        style: None,
    })
}

/// `corpus.jsonl` + `train` -> `corpus.train.jsonl`.
fn sibling(path: &Path, tag: &str) -> Result<PathBuf> {
    let stem = path.file_stem().context("output path has no file name")?;
    let ext = path.extension().map(|e| e.to_string_lossy().into_owned());
    let mut name = stem.to_string_lossy().into_owned();
    name.push('.');
    name.push_str(tag);
    if let Some(ext) = ext {
        name.push('.');
        name.push_str(&ext);
    }
    Ok(path.with_file_name(name))
}

#[derive(Debug, Args)]
pub struct LexiconArgs {
    /// Labeled corpus to collect mixed-case surfaces from.
    #[arg(long, alias = "in")]
    pub input: PathBuf,
    /// Lexicon TSV to write (lower, surface, count).
    #[arg(long, alias = "out")]
    pub output: PathBuf,
}

pub fn lexicon(args: &LexiconArgs, config: &PipelineConfig) -> Result<()> {
    let corpus = formats::read_corpus(&args.input)?;
    let sequences: Vec<LabeledSequence> = corpus.into_iter().map(|(_, s)| s).collect();
    let lexicon = MixedCaseLexicon::build(&sequences);

    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    formats::write_lexicon(&args.output, &lexicon)?;
    let mut manifest = RunManifest::new("lexicon", config);
    manifest.record_input(&args.input)?;
    manifest.record_output(&args.output);
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    println!("lexicon with {} entries", lexicon.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct TokenizerTrainArgs {
    /// Labeled corpus supplying the training words.
    #[arg(long, alias = "in")]
    pub input: PathBuf,
    /// Vocabulary file to write, one piece per line.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// word | subword.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    /// Minimum pair frequency for subword merges.
    #[arg(long)]
    pub min_frequency: Option<u64>,
}

pub fn tokenizer_train(args: &TokenizerTrainArgs, config: &PipelineConfig) -> Result<()> {
    let mode = match &args.mode {
        Some(m) => parse_mode(m)?,
        None => config.mode()?,
    };
    let vocab_size = args.vocab_size.unwrap_or(config.vocab_size);
    let min_frequency = args.min_frequency.unwrap_or(config.min_frequency);

    let corpus = formats::read_corpus(&args.input)?;
    let words: Vec<&str> = corpus
        .iter()
        .flat_map(|(_, seq)| seq.tokens.iter().map(|t| t.lower_form.as_str()))
        .collect();
    let vocab = match mode {
        TokenizerMode::Subword => {
            tokenizer::train_subword(words.iter().copied(), vocab_size, min_frequency)?
        }
        TokenizerMode::Word => tokenizer::word_vocab(words.iter().copied(), vocab_size)?,
    };

    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    formats::write_vocab(&args.output, &vocab)?;
    let mut manifest = RunManifest::new("tokenizer-train", config);
    manifest.record_input(&args.input)?;
    manifest.record_output(&args.output);
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    println!("vocabulary of {} pieces ({mode:?})", vocab.len());
    Ok(())
}

fn load_vocab_with_hash(path: &Path) -> Result<(Vocabulary, u64)> {
    let vocab = formats::read_vocab(path)?;
    let hash = crate::fnv1a64(&formats::vocab_file_bytes(&vocab));
    Ok((vocab, hash))
}

#[derive(Debug, Args)]
pub struct PretrainArgs {
    /// Labeled corpus; marks are re-inserted as tokens for masking.
    #[arg(long, alias = "in")]
    pub input: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Checkpoint to write.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// Continue pretraining from this checkpoint instead of fresh init.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// random | punct_selective.
    #[arg(long)]
    pub policy: Option<String>,
    /// word | subword.
    #[arg(long)]
    pub mode: Option<String>,
    /// Metrics log path (default: <output>.metrics.jsonl).
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

pub fn pretrain(args: &PretrainArgs, config: &PipelineConfig) -> Result<()> {
    let mut effective = config.clone();
    if let Some(policy) = &args.policy {
        effective.masking.policy = policy.clone();
    }
    if let Some(mode) = &args.mode {
        effective.tokenizer_mode = mode.clone();
    }
    effective.validate()?;
    let mode = effective.mode()?;
    let policy = effective.masking_policy()?;

    let (vocab, vocab_hash) = load_vocab_with_hash(&args.vocab)?;
    let corpus = formats::read_corpus(&args.input)?;
    let sequences: Vec<Vec<u32>> = corpus
        .iter()
        .map(|(_, seq)| tokenizer::encode_for_mlm(seq, &vocab, mode))
        .collect();

    let train_config = effective.train_config();
    let report = match &args.init {
        Some(init_path) => {
            let ckpt = load_compatible_checkpoint(init_path, vocab_hash, mode)?;
            training::continue_pretrain_mlm(
                ckpt.params,
                &sequences,
                &vocab,
                &train_config,
                &policy,
            )?
        }
        None => {
            let encoder = effective.encoder_config(vocab.len());
            training::pretrain_mlm(&sequences, &vocab, &encoder, &train_config, &policy)?
        }
    };
    if report.skipped > 0 {
        eprintln!(
            "warning: skipped {} sequences (shorter than {} pieces or over max_seq_len)",
            report.skipped,
            training::MIN_MLM_PIECES
        );
    }

    let metrics_path = args
        .metrics
        .clone()
        .unwrap_or_else(|| metrics_sibling(&args.output));
    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    guard.declare(&metrics_path);
    checkpoint::save(&args.output, &report.params, mode, vocab_hash)?;
    formats::write_metrics(&metrics_path, &report.steps)?;

    let mut manifest = RunManifest::new("pretrain", &effective);
    manifest.record_input(&args.input)?;
    manifest.record_input(&args.vocab)?;
    if let Some(init) = &args.init {
        manifest.record_input(init)?;
    }
    manifest.record_output(&args.output);
    manifest.record_output(&metrics_path);
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    let last = report.steps.last().map(|s| s.loss).unwrap_or(f64::NAN);
    println!(
        "pretrained {} steps, final loss {last:.4}",
        report.steps.len()
    );
    Ok(())
}

fn metrics_sibling(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".metrics.jsonl");
    output.with_file_name(name)
}

fn load_compatible_checkpoint(
    path: &Path,
    vocab_hash: u64,
    mode: TokenizerMode,
) -> Result<checkpoint::Checkpoint> {
    let ckpt = checkpoint::load(path)?;
    if ckpt.vocab_hash != vocab_hash {
        bail!(
            "incompatible checkpoint {}: trained with a different vocabulary (hash {:016x} vs {:016x})",
            path.display(),
            ckpt.vocab_hash,
            vocab_hash
        );
    }
    if ckpt.mode != mode {
        bail!(
            "incompatible checkpoint {}: tokenizer mode {:?} but {:?} requested",
            path.display(),
            ckpt.mode,
            mode
        );
    }
    Ok(ckpt)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labeled training corpus.
    #[arg(long, alias = "in")]
    pub input: PathBuf,
    /// Labeled dev corpus for the patience-based early stop.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Checkpoint to write.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// Initialize from this checkpoint (e.g. a pretrained model).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Keep only the first K encoder layers of the init checkpoint.
    #[arg(long)]
    pub truncate_layers: Option<usize>,
    /// Joint loss weight on the punctuation task.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// word | subword.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub metrics: Option<PathBuf>,
}

pub fn train(args: &TrainArgs, config: &PipelineConfig) -> Result<()> {
    let mut effective = config.clone();
    if let Some(alpha) = args.alpha {
        effective.training.alpha = alpha;
    }
    if let Some(mode) = &args.mode {
        effective.tokenizer_mode = mode.clone();
    }
    effective.validate()?;
    let mode = effective.mode()?;

    let (vocab, vocab_hash) = load_vocab_with_hash(&args.vocab)?;
    let encode_file = |path: &Path| -> Result<Vec<tokenizer::SubwordEncoding>> {
        Ok(formats::read_corpus(path)?
            .iter()
            .map(|(_, seq)| tokenizer::encode_sequence(seq, &vocab, mode))
            .collect())
    };
    let data = encode_file(&args.input)?;
    let dev = args.dev.as_ref().map(|p| encode_file(p)).transpose()?;

    let init = match &args.init {
        Some(init_path) => {
            let ckpt = load_compatible_checkpoint(init_path, vocab_hash, mode)?;
            match args.truncate_layers {
                Some(k) => ckpt.params.truncate(k)?,
                None => ckpt.params,
            }
        }
        None => {
            if args.truncate_layers.is_some() {
                bail!("--truncate-layers requires --init");
            }
            ModelParameters::init(&effective.encoder_config(vocab.len()), effective.seed)?
        }
    };

    let train_config = effective.train_config();
    let report = training::train_joint(init, &data, dev.as_deref(), &train_config)?;
    if report.skipped > 0 {
        eprintln!(
            "warning: skipped {} sequences over max_seq_len {}; consider prepare --max-words",
            report.skipped, report.params.config.max_seq_len
        );
    }

    let metrics_path = args
        .metrics
        .clone()
        .unwrap_or_else(|| metrics_sibling(&args.output));
    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    guard.declare(&metrics_path);
    checkpoint::save(&args.output, &report.params, mode, vocab_hash)?;
    formats::write_metrics(&metrics_path, &report.steps)?;

    let mut manifest = RunManifest::new("train", &effective);
    manifest.record_input(&args.input)?;
    manifest.record_input(&args.vocab)?;
    if let Some(dev) = &args.dev {
        manifest.record_input(dev)?;
    }
    if let Some(init) = &args.init {
        manifest.record_input(init)?;
    }
    manifest.record_output(&args.output);
    manifest.record_output(&metrics_path);
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    let last = report.steps.last().map(|s| s.loss).unwrap_or(f64::NAN);
    println!("trained {} steps, final loss {last:.4}", report.steps.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub vocab: PathBuf,
    /// Plain-text file; the whole file is one document.
    #[arg(long, alias = "in")]
    pub input: PathBuf,
    /// Restored text output.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// Mixed-case lexicon TSV.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Also write per-word labels as TSV (word, punct, case).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub chunk_core: Option<usize>,
    #[arg(long)]
    pub chunk_overlap: Option<usize>,
    /// word | subword; defaults to the mode stored in the checkpoint.
    #[arg(long)]
    pub mode: Option<String>,
}

pub fn predict(args: &PredictArgs, config: &PipelineConfig) -> Result<()> {
    let (vocab, vocab_hash) = load_vocab_with_hash(&args.vocab)?;
    let ckpt = checkpoint::load(&args.model)?;
    if ckpt.vocab_hash != vocab_hash {
        bail!(
            "checkpoint {} was trained with a different vocabulary",
            args.model.display()
        );
    }
    let mode = match &args.mode {
        Some(m) => parse_mode(m)?,
        None => ckpt.mode,
    };
    let core = args.chunk_core.unwrap_or(config.chunk_core);
    let overlap = args.chunk_overlap.unwrap_or(config.chunk_overlap);
    if core == 0 {
        bail!("chunk core must be at least 1");
    }
    if core + 2 * overlap > ckpt.params.config.max_seq_len {
        bail!(
            "chunk window {core} + 2*{overlap} exceeds the model's max_seq_len {}",
            ckpt.params.config.max_seq_len
        );
    }

    let lexicon = match &args.lexicon {
        Some(path) => formats::read_lexicon(path)?,
        None => MixedCaseLexicon::new(),
    };
    let text = fs::read_to_string(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))?;

    let prediction = inference::predict(
        &text,
        &ckpt.params,
        &vocab,
        mode,
        &lexicon,
        ChunkOptions { core, overlap },
    )?;
    if prediction.resplit_chunks > 0 {
        eprintln!(
            "warning: {} chunks re-split because their subword expansion overflowed the encoder",
            prediction.resplit_chunks
        );
    }

    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    fs::write(&args.output, format!("{}\n", prediction.text))
        .with_context(|| format!("cannot write {}", args.output.display()))?;
    if let Some(labels_path) = &args.labels {
        guard.declare(labels_path);
        formats::write_labels_tsv(labels_path, &prediction.sequence)?;
    }

    let mut manifest = RunManifest::new("predict", config);
    manifest.record_input(&args.model)?;
    manifest.record_input(&args.vocab)?;
    manifest.record_input(&args.input)?;
    if let Some(lex) = &args.lexicon {
        manifest.record_input(lex)?;
    }
    manifest.record_output(&args.output);
    if let Some(labels_path) = &args.labels {
        manifest.record_output(labels_path);
    }
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    println!("restored {} words", prediction.sequence.len());
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predicted labeled corpus.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Gold labeled corpus, word-aligned with the predictions.
    #[arg(long)]
    pub gold: PathBuf,
    /// Writes <prefix>.tsv and <prefix>.json.
    #[arg(long)]
    pub output_prefix: PathBuf,
}

pub fn evaluate(args: &EvaluateArgs, config: &PipelineConfig) -> Result<()> {
    let predicted: Vec<LabeledSequence> = formats::read_corpus(&args.predictions)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let gold: Vec<LabeledSequence> = formats::read_corpus(&args.gold)?
        .into_iter()
        .map(|(_, s)| s)
        .collect();
    let (punct, case) = evaluation::score(&predicted, &gold).map_err(|e| match e {
        evaluation::EvalError::AlignmentRequired { .. } => anyhow::anyhow!(
            "{e}; run `puncase align-restore` to produce word-aligned gold labels first"
        ),
        other => anyhow::anyhow!("{other}"),
    })?;

    let tsv_path = args.output_prefix.with_extension("tsv");
    let json_path = args.output_prefix.with_extension("json");
    let mut guard = OutputGuard::new();
    guard.declare(&tsv_path);
    guard.declare(&json_path);
    fs::write(&tsv_path, evaluation::render_tsv(&[&punct, &case]))?;
    let json = serde_json::to_string_pretty(&formats::report_json(&[&punct, &case]))?;
    fs::write(&json_path, json)?;

    let mut manifest = RunManifest::new("evaluate", config);
    manifest.record_input(&args.predictions)?;
    manifest.record_input(&args.gold)?;
    manifest.record_output(&tsv_path);
    manifest.record_output(&json_path);
    let mpath = manifest.write_beside(&tsv_path)?;
    guard.declare(&mpath);
    guard.commit();
    println!(
        "punctuation macro-F1 {:.4}, truecasing macro-F1 {:.4}",
        punct.macro_f1, case.macro_f1
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct AlignRestoreArgs {
    /// Labeled reference corpus with ids.
    #[arg(long)]
    pub reference: PathBuf,
    /// Hypothesis JSON-lines ({utt_id, rank, words}).
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Restored labeled corpus to write.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// Also write per-transcript WER rows ({id, wer}) for rank-1 hypotheses.
    #[arg(long)]
    pub wer_output: Option<PathBuf>,
}

pub fn align_restore(args: &AlignRestoreArgs, config: &PipelineConfig) -> Result<()> {
    let references = read_corpus_by_id(&args.reference)?;
    let mut hypotheses = read_hypotheses(&args.hypotheses)?;
    hypotheses.sort_by(|a, b| a.utt_id.cmp(&b.utt_id).then(a.rank.cmp(&b.rank)));

    let mut records = Vec::new();
    let mut scored = Vec::new();
    let mut total_dropped = 0usize;
    for hyp in &hypotheses {
        let reference = references
            .get(&hyp.utt_id)
            .with_context(|| format!("no reference sequence for utterance {}", hyp.utt_id))?;
        let (restored, alignment, dropped) = robustness::restore_labels(reference, &hyp.words)?;
        total_dropped += dropped;
        let mut record = CorpusRecord::from_sequence(Some(hyp.utt_id.clone()), &restored);
        record.source = Some("asr".to_string());
        record.rank = Some(hyp.rank);
        records.push(record);
        if hyp.rank == 1 {
            scored.push(ScoredRecord {
                id: hyp.utt_id.clone(),
                wer: alignment.wer,
            });
        }
    }
    if total_dropped > 0 {
        eprintln!("warning: {total_dropped} reference marks had no hypothesis word to attach to");
    }

    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    formats::write_jsonl(&args.output, &records)?;
    if let Some(wer_path) = &args.wer_output {
        guard.declare(wer_path);
        formats::write_jsonl(wer_path, &scored)?;
    }

    let mut manifest = RunManifest::new("align-restore", config);
    manifest.record_input(&args.reference)?;
    manifest.record_input(&args.hypotheses)?;
    manifest.record_output(&args.output);
    if let Some(wer_path) = &args.wer_output {
        manifest.record_output(wer_path);
    }
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    println!("restored {} hypotheses", records.len());
    Ok(())
}

/// Reads hypothesis records, lowercasing the words so alignment and WER are
/// case-insensitive regardless of how the recognizer cased its output.
fn read_hypotheses(path: &Path) -> Result<Vec<HypothesisRecord>> {
    let mut records: Vec<HypothesisRecord> = formats::read_jsonl(path)?;
    for record in &mut records {
        for word in &mut record.words {
            if word.chars().any(|c| c.is_uppercase()) {
                *word = word.to_lowercase();
            }
        }
    }
    Ok(records)
}

fn read_corpus_by_id(path: &Path) -> Result<BTreeMap<String, LabeledSequence>> {
    let mut by_id = BTreeMap::new();
    for (id, seq) in formats::read_corpus(path)? {
        let id =
            id.with_context(|| format!("{}: every reference record needs an id", path.display()))?;
        if by_id.insert(id.clone(), seq).is_some() {
            bail!("{}: duplicate sequence id {id:?}", path.display());
        }
    }
    Ok(by_id)
}

#[derive(Debug, Args)]
pub struct WerSplitArgs {
    /// JSON-lines of {id, wer} rows, e.g. from align-restore --wer-output.
    #[arg(long, alias = "in")]
    pub input: PathBuf,
    /// Writes <prefix>.train/.dev/.test/.discarded.jsonl.
    #[arg(long)]
    pub output_prefix: PathBuf,
    #[arg(long)]
    pub wer_threshold: Option<f64>,
    #[arg(long)]
    pub test_n: Option<usize>,
    #[arg(long)]
    pub dev_n: Option<usize>,
}

pub fn wer_split(args: &WerSplitArgs, config: &PipelineConfig) -> Result<()> {
    let records: Vec<ScoredRecord> = formats::read_jsonl(&args.input)?;
    let transcripts: Vec<ScoredTranscript> = records
        .iter()
        .map(|r| ScoredTranscript {
            id: r.id.clone(),
            wer: r.wer,
        })
        .collect();
    let threshold = args.wer_threshold.unwrap_or(config.wer_threshold);
    let test_n = args.test_n.unwrap_or(config.wer_test_n);
    let dev_n = args.dev_n.unwrap_or(config.wer_dev_n);
    let split = robustness::wer_filter_split(&transcripts, threshold, test_n, dev_n)?;

    let mut guard = OutputGuard::new();
    let mut manifest = RunManifest::new("wer-split", config);
    manifest.record_input(&args.input)?;
    let mut first_output = None;
    for (tag, items) in [
        ("train", &split.train),
        ("dev", &split.dev),
        ("test", &split.test),
        ("discarded", &split.discarded),
    ] {
        let path = prefixed(&args.output_prefix, tag);
        let rows: Vec<ScoredRecord> = items
            .iter()
            .map(|t| ScoredRecord {
                id: t.id.clone(),
                wer: t.wer,
            })
            .collect();
        guard.declare(&path);
        formats::write_jsonl(&path, &rows)?;
        manifest.record_output(&path);
        first_output.get_or_insert(path);
    }
    let mpath = manifest.write_beside(&first_output.unwrap())?;
    guard.declare(&mpath);
    guard.commit();
    println!(
        "wer split: {} train, {} dev, {} test, {} discarded (threshold {threshold})",
        split.train.len(),
        split.dev.len(),
        split.test.len(),
        split.discarded.len()
    );
    Ok(())
}

fn prefixed(prefix: &Path, tag: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(tag);
    name.push(".jsonl");
    prefix.with_file_name(name)
}

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Ground-truth labeled corpus with utterance ids.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Hypothesis JSON-lines ({utt_id, rank, words}).
    #[arg(long)]
    pub hypotheses: PathBuf,
    /// Augmented labeled corpus to write.
    #[arg(long, alias = "out")]
    pub output: PathBuf,
    /// How many top hypotheses per utterance to add (0 = ground truth only).
    #[arg(long)]
    pub nbest: Option<usize>,
}

pub fn augment(args: &AugmentArgs, config: &PipelineConfig) -> Result<()> {
    let n = args.nbest.unwrap_or(config.nbest);
    if n > 5 {
        bail!("nbest is capped at 5");
    }
    let ground_truth: Vec<(String, LabeledSequence)> = {
        let mut out = Vec::new();
        for (id, seq) in formats::read_corpus(&args.ground_truth)? {
            let id = id.context("every ground-truth record needs an id")?;
            out.push((id, seq));
        }
        out
    };
    let mut hypotheses = read_hypotheses(&args.hypotheses)?;
    hypotheses.sort_by(|a, b| a.utt_id.cmp(&b.utt_id).then(a.rank.cmp(&b.rank)));
    let mut lists: BTreeMap<String, NBestList> = BTreeMap::new();
    for hyp in hypotheses {
        lists
            .entry(hyp.utt_id.clone())
            .or_insert_with(|| NBestList {
                utterance_id: hyp.utt_id.clone(),
                hypotheses: Vec::new(),
            })
            .hypotheses
            .push(hyp.words);
    }
    let orphaned = lists
        .keys()
        .filter(|id| !ground_truth.iter().any(|(gid, _)| gid == *id))
        .count();
    if orphaned > 0 {
        eprintln!(
            "warning: {orphaned} hypothesis utterance ids have no ground-truth sequence and will be ignored"
        );
    }
    let lists: Vec<NBestList> = lists.into_values().collect();

    let augmented = robustness::augment_nbest(&ground_truth, &lists, n)?;
    let records: Vec<CorpusRecord> = augmented
        .iter()
        .map(|a| {
            CorpusRecord::from_sequence(Some(a.utterance_id.clone()), &a.sequence)
                .with_provenance(a.provenance)
        })
        .collect();

    let mut guard = OutputGuard::new();
    guard.declare(&args.output);
    formats::write_jsonl(&args.output, &records)?;
    let mut manifest = RunManifest::new("augment", config);
    manifest.record_input(&args.ground_truth)?;
    manifest.record_input(&args.hypotheses)?;
    manifest.record_output(&args.output);
    let mpath = manifest.write_beside(&args.output)?;
    guard.declare(&mpath);
    guard.commit();
    let asr = records
        .iter()
        .filter(|r| r.source.as_deref() == Some("asr"))
        .count();
    println!(
        "augmented corpus: {} ground truth + {} restored hypotheses",
        records.len() - asr,
        asr
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use puncase_core::corpus::derive_labels;

    #[test]
    fn segmentation_cuts_at_marks() {
        let seq = derive_labels("one two. three four five. six")
            .unwrap()
            .sequence;
        let parts = segment_sequence(seq, 3);
        let words: Vec<Vec<&str>> = parts
            .iter()
            .map(|p| p.tokens.iter().map(|t| t.lower_form.as_str()).collect())
            .collect();
        assert_eq!(
            words,
            vec![
                vec!["one", "two"],
                vec!["three", "four", "five"],
                vec!["six"]
            ]
        );
    }

    #[test]
    fn segmentation_hard_cuts_without_marks() {
        let seq = derive_labels("a b c d e").unwrap().sequence;
        let parts = segment_sequence(seq, 2);
        assert_eq!(parts.len(), 3);
        assert_eq!(parts[0].len(), 2);
        assert_eq!(parts[2].len(), 1);
    }

    #[test]
    fn short_sequences_pass_through() {
        let seq = derive_labels("a b c").unwrap().sequence;
        let parts = segment_sequence(seq.clone(), 10);
        assert_eq!(parts, vec![seq]);
    }

    #[test]
    fn sibling_and_prefixed_paths() {
        assert_eq!(
            sibling(Path::new("/tmp/corpus.jsonl"), "train").unwrap(),
            Path::new("/tmp/corpus.train.jsonl")
        );
        assert_eq!(
            prefixed(Path::new("/tmp/wer"), "dev"),
            Path::new("/tmp/wer.dev.jsonl")
        );
    }
}
