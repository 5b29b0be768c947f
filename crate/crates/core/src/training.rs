//! Masked-token pretraining and supervised joint fine-tuning.
//!
//! Pretraining masks 15% of piece positions; the punctuation-selective policy
//! spends half of the selections (rounded down) on punctuation-mark tokens so
//! the model learns mark placement, falling back to ordinary positions when a
//! sequence has too few marks. Selected positions follow the usual 80/10/10
//! replacement scheme: `[MASK]`, a random piece, or left unchanged.
//!
//! Both loops are bitwise deterministic for a given seed: epoch shuffling,
//! masking and dropout streams are all derived from `(seed, epoch, sequence)`,
//! and batches are length-bucketed with padding to the bucket maximum.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::model::backprop::{self, Dropout};
use crate::model::{EncoderConfig, ModelError, ModelParameters};
use crate::rng::Rng;
use crate::tokenizer::{SubwordEncoding, Vocabulary, MASK_ID, PAD_ID};

/// Fewer pieces than this and a sequence is skipped for pretraining: the 15%
/// selection would not reliably pick a meaningful position.
pub const MIN_MLM_PIECES: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskingKind {
    Random,
    PunctSelective,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskingPolicy {
    pub kind: MaskingKind,
    pub mask_fraction: f64,
    pub punct_share: f64,
}

impl MaskingPolicy {
    pub fn random() -> Self {
        MaskingPolicy {
            kind: MaskingKind::Random,
            mask_fraction: 0.15,
            punct_share: 0.5,
        }
    }

    pub fn punct_selective() -> Self {
        MaskingPolicy {
            kind: MaskingKind::PunctSelective,
            mask_fraction: 0.15,
            punct_share: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if !(self.mask_fraction > 0.0 && self.mask_fraction < 1.0) {
            return Err(TrainError::InvalidConfig("mask_fraction must be in (0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.punct_share) {
            return Err(TrainError::InvalidConfig("punct_share must be in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub alpha: f64,
    pub gradient_clip_norm: f64,
    pub weight_decay: f64,
    pub seed: u64,
    /// Stop after this many epochs without a dev macro-F1 improvement.
    pub patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            learning_rate: 3e-4,
            epochs: 10,
            alpha: 0.6,
            gradient_clip_norm: 1.0,
            weight_decay: 0.01,
            seed: 0,
            patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be positive"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning_rate must be positive"));
        }
        if !(self.gradient_clip_norm > 0.0) {
            return Err(TrainError::InvalidConfig(
                "gradient_clip_norm must be positive",
            ));
        }
        if !(self.alpha >= 0.0) {
            return Err(TrainError::InvalidConfig("alpha must be nonnegative"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(TrainError::InvalidConfig(
                "weight_decay must be nonnegative",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    InvalidConfig(&'static str),
    /// Sequence too short for masked pretraining; callers usually skip.
    SequenceTooShort {
        len: usize,
    },
    /// Token ids in the data do not fit the model's vocabulary.
    IncompatibleCheckpoint {
        max_id: u32,
        vocab_size: usize,
    },
    /// Nothing trainable in the input.
    NoData,
    Model(ModelError),
}

impl fmt::Display for TrainError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrainError::InvalidConfig(msg) => write!(f, "invalid training config: {msg}"),
            TrainError::SequenceTooShort { len } => {
                write!(
                    f,
                    "sequence of {len} pieces is too short to mask (minimum {MIN_MLM_PIECES})"
                )
            }
            TrainError::IncompatibleCheckpoint { max_id, vocab_size } => write!(
                f,
                "data references token id {max_id} but the checkpoint vocabulary holds {vocab_size}"
            ),
            TrainError::NoData => f.write_str("no trainable sequences"),
            TrainError::Model(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for TrainError {}

impl From<ModelError> for TrainError {
    fn from(e: ModelError) -> Self {
        TrainError::Model(e)
    }
}

/// One masked pretraining example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MlmExample {
    pub input: Vec<u32>,
    /// Original piece id at selected positions, `None` elsewhere.
    pub targets: Vec<Option<u32>>,
    pub masked_positions: Vec<usize>,
}

/// Selects `ceil(mask_fraction * n)` positions per the policy and applies
/// 80/10/10 replacement. The input must be the punctuated piece sequence
/// (marks as ordinary tokens) so marks are selectable.
pub fn make_mlm_batch(
    pieces: &[u32],
    vocab: &Vocabulary,
    policy: &MaskingPolicy,
    rng: &mut Rng,
) -> Result<MlmExample, TrainError> {
    policy.validate()?;
    let n = pieces.len();
    if n < MIN_MLM_PIECES {
        return Err(TrainError::SequenceTooShort { len: n });
    }
    let k = ceil_frac(policy.mask_fraction, n);

    let mut selected: Vec<usize> = match policy.kind {
        MaskingKind::Random => {
            let all: Vec<usize> = (0..n).collect();
            rng.sample(&all, k)
        }
        MaskingKind::PunctSelective => {
            let mark_positions: Vec<usize> = (0..n).filter(|&i| vocab.is_mark(pieces[i])).collect();
            let other_positions: Vec<usize> =
                (0..n).filter(|&i| !vocab.is_mark(pieces[i])).collect();
            let want_marks = ((k as f64 * policy.punct_share) as usize).min(mark_positions.len());
            let mut sel = rng.sample(&mark_positions, want_marks);
            let rest = k - sel.len();
            if rest <= other_positions.len() {
                sel.extend(rng.sample(&other_positions, rest));
            } else {
                // Degenerate case: nearly everything is a mark.
                sel.extend_from_slice(&other_positions);
                let unused: Vec<usize> = mark_positions
                    .iter()
                    .copied()
                    .filter(|p| !sel.contains(p))
                    .collect();
                let shortfall = k - sel.len();
                sel.extend(rng.sample(&unused, shortfall));
            }
            sel
        }
    };
    selected.sort_unstable();

    let mut input = pieces.to_vec();
    let mut targets = vec![None; n];
    for &pos in &selected {
        targets[pos] = Some(pieces[pos]);
        let roll = rng.next_f64();
        if roll < 0.8 {
            input[pos] = MASK_ID;
        } else if roll < 0.9 {
            // Random content piece (skipping PAD/UNK/MASK).
            let content = vocab.len() as u32 - 3;
            input[pos] = 3 + rng.below(content as usize) as u32;
        }
        // else: left unchanged.
    }
    Ok(MlmExample {
        input,
        targets,
        masked_positions: selected,
    })
}

fn ceil_frac(fraction: f64, n: usize) -> usize {
    libm::ceil(fraction * n as f64) as usize
}

/// Adam with decoupled weight decay. Moments are stored in two
/// parameter-shaped buffers and iterated through the flat tensor list.
pub struct AdamW {
    first: ModelParameters,
    second: ModelParameters,
    step: u64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl AdamW {
    pub fn new(config: &EncoderConfig, learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            first: ModelParameters::zeros(config),
            second: ModelParameters::zeros(config),
            step: 0,
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay,
        }
    }

    pub fn step(&mut self, params: &mut ModelParameters, grads: &ModelParameters) {
        self.step += 1;
        let bias1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let bias2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for t in 0..params.tensor_count() {
            let decay = if params.tensor_is_weight(t) {
                self.weight_decay
            } else {
                0.0
            };
            let g = grads.tensor(t);
            let m = self.first.tensor_mut(t);
            for (mi, gi) in m.iter_mut().zip(g) {
                *mi = self.beta1 * *mi + (1.0 - self.beta1) * gi;
            }
            let v = self.second.tensor_mut(t);
            for (vi, gi) in v.iter_mut().zip(g) {
                *vi = self.beta2 * *vi + (1.0 - self.beta2) * gi * gi;
            }
            let m = self.first.tensor(t);
            let v = self.second.tensor(t);
            let p = params.tensor_mut(t);
            for i in 0..p.len() {
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                p[i] -= self.learning_rate * (m_hat / (libm::sqrt(v_hat) + self.epsilon));
                if decay > 0.0 {
                    p[i] -= self.learning_rate * decay * p[i];
                }
            }
        }
    }
}

/// Scales gradients in place so their global L2 norm does not exceed
/// `max_norm`; returns the pre-clip norm.
pub fn clip_gradients(grads: &mut ModelParameters, max_norm: f64) -> f64 {
    let mut sq = 0.0;
    for t in 0..grads.tensor_count() {
        for &g in grads.tensor(t) {
            sq += g * g;
        }
    }
    let norm = libm::sqrt(sq);
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for t in 0..grads.tensor_count() {
            for g in grads.tensor_mut(t) {
                *g *= scale;
            }
        }
    }
    norm
}

/// One optimizer step's losses, for the metrics log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step: u64,
    pub loss: f64,
    pub loss_punct: Option<f64>,
    pub loss_case: Option<f64>,
}

#[derive(Debug)]
pub struct TrainReport {
    pub params: ModelParameters,
    pub steps: Vec<StepMetrics>,
    /// Sequences skipped for being too short or longer than `max_seq_len`.
    pub skipped: usize,
}

/// Length-bucketed batch order: indices sorted by length, cut into batches,
/// batch order shuffled. Deterministic for a given epoch stream.
fn bucketed_batches(lengths: &[usize], batch_size: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    rng.shuffle(&mut order);
    order.sort_by_key(|&i| lengths[i]); // stable: keeps shuffled order within a length
    let mut batches: Vec<Vec<usize>> = order.chunks(batch_size).map(|c| c.to_vec()).collect();
    rng.shuffle(&mut batches);
    batches
}

/// Pretrains from random initialization with the masked-token objective.
pub fn pretrain_mlm(
    sequences: &[Vec<u32>],
    vocab: &Vocabulary,
    encoder_config: &EncoderConfig,
    config: &TrainConfig,
    policy: &MaskingPolicy,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    policy.validate()?;
    let params = ModelParameters::init(encoder_config, config.seed)?;
    continue_pretrain_mlm(params, sequences, vocab, config, policy)
}

/// Pretraining loop over already-initialized parameters.
pub fn continue_pretrain_mlm(
    mut params: ModelParameters,
    sequences: &[Vec<u32>],
    vocab: &Vocabulary,
    config: &TrainConfig,
    policy: &MaskingPolicy,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    policy.validate()?;
    check_vocab(
        sequences.iter().flatten().copied(),
        params.config.vocab_size,
    )?;
    let max_len = params.config.max_seq_len;

    let usable: Vec<usize> = (0..sequences.len())
        .filter(|&i| sequences[i].len() >= MIN_MLM_PIECES && sequences[i].len() <= max_len)
        .collect();
    let skipped = sequences.len() - usable.len();
    if usable.is_empty() {
        return Err(TrainError::NoData);
    }
    let lengths: Vec<usize> = usable.iter().map(|&i| sequences[i].len()).collect();

    let mut optimizer = AdamW::new(&params.config, config.learning_rate, config.weight_decay);
    let mut steps = Vec::new();
    let mut step = 0u64;
    for epoch in 0..config.epochs {
        let mut epoch_rng = Rng::derive(config.seed, &[0, epoch as u64]);
        for batch in bucketed_batches(&lengths, config.batch_size, &mut epoch_rng) {
            let bucket_max = batch.iter().map(|&b| lengths[b]).max().unwrap();
            let mut grads = ModelParameters::zeros(&params.config);
            let mut loss_sum = 0.0;
            let mut counted = 0usize;
            for &b in &batch {
                let seq_idx = usable[b];
                let seq = &sequences[seq_idx];
                let mut mask_rng = Rng::derive(config.seed, &[1, epoch as u64, seq_idx as u64]);
                let example = make_mlm_batch(seq, vocab, policy, &mut mask_rng)?;
                let mut input = example.input;
                let valid = input.len();
                input.resize(bucket_max, PAD_ID);
                let mut targets = example.targets;
                targets.resize(bucket_max, None);

                let mut dropout_rng = Rng::derive(config.seed, &[2, epoch as u64, seq_idx as u64]);
                let mut dropout = Dropout {
                    rate: params.config.dropout_rate,
                    rng: &mut dropout_rng,
                };
                let dropout_opt = (params.config.dropout_rate > 0.0).then_some(&mut dropout);
                loss_sum += backprop::mlm_forward_backward(
                    &params,
                    &input,
                    valid,
                    &targets,
                    dropout_opt,
                    &mut grads,
                )?;
                counted += 1;
            }
            scale_gradients(&mut grads, 1.0 / counted as f64);
            clip_gradients(&mut grads, config.gradient_clip_norm);
            optimizer.step(&mut params, &grads);
            step += 1;
            steps.push(StepMetrics {
                step,
                loss: loss_sum / counted as f64,
                loss_punct: None,
                loss_case: None,
            });
        }
    }
    Ok(TrainReport {
        params,
        steps,
        skipped,
    })
}

fn scale_gradients(grads: &mut ModelParameters, scale: f64) {
    for t in 0..grads.tensor_count() {
        for g in grads.tensor_mut(t) {
            *g *= scale;
        }
    }
}

fn check_vocab<I: IntoIterator<Item = u32>>(ids: I, vocab_size: usize) -> Result<(), TrainError> {
    if let Some(max_id) = ids.into_iter().max() {
        if max_id as usize >= vocab_size {
            return Err(TrainError::IncompatibleCheckpoint { max_id, vocab_size });
        }
    }
    Ok(())
}

/// Per-piece class targets of an encoded sequence.
pub fn encoding_targets(enc: &SubwordEncoding) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let punct = enc
        .labels
        .iter()
        .map(|l| l.map(|(p, _)| p.index()))
        .collect();
    let case = enc
        .labels
        .iter()
        .map(|l| l.map(|(_, c)| c.index()))
        .collect();
    (punct, case)
}

/// Supervised fine-tuning of the joint objective over label-projected
/// encodings. `init_params` may be a fresh initialization or a pretrained
/// checkpoint. With a dev set and `patience`, training stops after that many
/// epochs without dev improvement and returns the best parameters seen.
pub fn train_joint(
    init_params: ModelParameters,
    data: &[SubwordEncoding],
    dev: Option<&[SubwordEncoding]>,
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    let mut params = init_params;
    check_vocab(
        data.iter().flat_map(|e| e.piece_ids.iter().copied()),
        params.config.vocab_size,
    )?;
    let max_len = params.config.max_seq_len;
    let usable: Vec<usize> = (0..data.len())
        .filter(|&i| !data[i].is_empty() && data[i].len() <= max_len)
        .collect();
    let skipped = data.len() - usable.len();
    if usable.is_empty() {
        return Err(TrainError::NoData);
    }
    let lengths: Vec<usize> = usable.iter().map(|&i| data[i].len()).collect();

    let mut optimizer = AdamW::new(&params.config, config.learning_rate, config.weight_decay);
    let mut steps = Vec::new();
    let mut step = 0u64;
    let mut best: Option<(f64, ModelParameters)> = None;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.epochs {
        let mut epoch_rng = Rng::derive(config.seed, &[0, epoch as u64]);
        for batch in bucketed_batches(&lengths, config.batch_size, &mut epoch_rng) {
            let bucket_max = batch.iter().map(|&b| lengths[b]).max().unwrap();
            let mut grads = ModelParameters::zeros(&params.config);
            let mut sums = (0.0, 0.0, 0.0);
            let mut counted = 0usize;
            for &b in &batch {
                let seq_idx = usable[b];
                let enc = &data[seq_idx];
                let (mut punct, mut case) = encoding_targets(enc);
                let mut input = enc.piece_ids.clone();
                let valid = input.len();
                input.resize(bucket_max, PAD_ID);
                punct.resize(bucket_max, None);
                case.resize(bucket_max, None);

                let mut dropout_rng = Rng::derive(config.seed, &[2, epoch as u64, seq_idx as u64]);
                let mut dropout = Dropout {
                    rate: params.config.dropout_rate,
                    rng: &mut dropout_rng,
                };
                let dropout_opt = (params.config.dropout_rate > 0.0).then_some(&mut dropout);
                let loss = backprop::joint_forward_backward(
                    &params,
                    &input,
                    valid,
                    &punct,
                    &case,
                    config.alpha,
                    dropout_opt,
                    &mut grads,
                )?;
                sums.0 += loss.total;
                sums.1 += loss.punct;
                sums.2 += loss.case;
                counted += 1;
            }
            scale_gradients(&mut grads, 1.0 / counted as f64);
            clip_gradients(&mut grads, config.gradient_clip_norm);
            optimizer.step(&mut params, &grads);
            step += 1;
            steps.push(StepMetrics {
                step,
                loss: sums.0 / counted as f64,
                loss_punct: Some(sums.1 / counted as f64),
                loss_case: Some(sums.2 / counted as f64),
            });
        }

        if let (Some(dev_data), Some(patience)) = (dev, config.patience) {
            let score = dev_macro_f1(&params, dev_data)?;
            let improved = best.as_ref().is_none_or(|(b, _)| score > *b);
            if improved {
                best = Some((score, params.clone()));
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= patience {
                    break;
                }
            }
        }
    }

    if let Some((_, best_params)) = best {
        params = best_params;
    }
    Ok(TrainReport {
        params,
        steps,
        skipped,
    })
}

/// Mean of the punctuation and casing macro-F1 on a labeled dev set.
pub fn dev_macro_f1(params: &ModelParameters, dev: &[SubwordEncoding]) -> Result<f64, TrainError> {
    use crate::corpus::{CASE_CLASSES, PUNCT_CLASSES};
    use crate::evaluation::ClassCounts;

    let mut punct_counts = ClassCounts::new(PUNCT_CLASSES);
    let mut case_counts = ClassCounts::new(CASE_CLASSES);
    for enc in dev {
        if enc.is_empty() || enc.len() > params.config.max_seq_len {
            continue;
        }
        let predicted = crate::inference::predict_encoded(params, enc)?;
        for (piece, (p_pred, c_pred)) in enc.word_final_positions().iter().zip(&predicted) {
            if let Some((p_gold, c_gold)) = enc.labels[*piece] {
                punct_counts.record(p_gold.index(), p_pred.index());
                case_counts.record(c_gold.index(), c_pred.index());
            }
        }
    }
    Ok((punct_counts.macro_f1() + case_counts.macro_f1()) / 2.0)
}
