//! The joint tagger: a transformer encoder with three output heads.
//!
//! The punctuation head is a linear-softmax layer over the hidden states. The
//! casing head consumes the punctuation *probabilities* concatenated with the
//! hidden state, so casing is conditioned on punctuation at train and
//! inference time alike, and the casing loss back-propagates through the
//! punctuation distribution. The masked-token head maps hidden states to the
//! vocabulary for pretraining. The combined training objective is
//! `alpha * punctuation_loss + casing_loss`.
//!
//! Forward and backward passes are hand-written in f64 (see [`backprop`]) and
//! are verified against central finite differences in the test suite.

pub mod backprop;
pub mod math;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::corpus::{CASE_CLASSES, PUNCT_CLASSES};
use crate::rng::Rng;
use math::{softmax_rows, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub dropout_rate: f64,
}

impl Default for EncoderConfig {
    /// Desk-scale defaults; deep pretrained encoders are out of reach here
    /// and shallow ones trade little accuracy for much less compute.
    fn default() -> Self {
        EncoderConfig {
            num_layers: 4,
            hidden_dim: 64,
            num_heads: 4,
            ff_dim: 256,
            max_seq_len: 320,
            vocab_size: 0,
            dropout_rate: 0.1,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = self.num_layers > 0
            && self.hidden_dim > 0
            && self.num_heads > 0
            && self.ff_dim > 0
            && self.max_seq_len > 0
            && self.vocab_size > 0;
        if !positive {
            return Err(ModelError::InvalidConfig("all dimensions must be positive"));
        }
        if !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(ModelError::InvalidConfig(
                "hidden_dim must be divisible by num_heads",
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidConfig("dropout_rate must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_dim / self.num_heads
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    InvalidConfig(&'static str),
    /// Sequence longer than `max_seq_len`; the caller must chunk.
    ChunkingRequired {
        len: usize,
        max: usize,
    },
    /// Empty input to the encoder.
    EmptySequence,
    /// A token id outside the configured vocabulary.
    InvalidTokenId {
        id: u32,
        vocab_size: usize,
    },
    /// Layer count outside `1..=num_layers`.
    InvalidTruncation {
        keep: usize,
        layers: usize,
    },
    /// A loss was requested with no supervised positions.
    NoSupervision,
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::InvalidConfig(msg) => write!(f, "invalid encoder config: {msg}"),
            ModelError::ChunkingRequired { len, max } => {
                write!(
                    f,
                    "sequence of {len} pieces exceeds max_seq_len {max}; chunk the input"
                )
            }
            ModelError::EmptySequence => f.write_str("cannot encode an empty sequence"),
            ModelError::InvalidTokenId { id, vocab_size } => {
                write!(f, "token id {id} outside vocabulary of size {vocab_size}")
            }
            ModelError::InvalidTruncation { keep, layers } => {
                write!(f, "cannot keep {keep} of {layers} layers")
            }
            ModelError::NoSupervision => f.write_str("no supervised positions in batch"),
        }
    }
}

impl core::error::Error for ModelError {}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNormParams {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LayerNormParams {
    fn ones(dim: usize) -> Self {
        LayerNormParams {
            gain: vec![1.0; dim],
            bias: vec![0.0; dim],
        }
    }

    fn zeros(dim: usize) -> Self {
        LayerNormParams {
            gain: vec![0.0; dim],
            bias: vec![0.0; dim],
        }
    }
}

/// One linear layer, `output = input · weight + bias` with `weight` stored
/// `in_dim × out_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl LinearParams {
    fn zeros(in_dim: usize, out_dim: usize) -> Self {
        LinearParams {
            weight: Matrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
        }
    }

    fn randn(in_dim: usize, out_dim: usize, std: f64, rng: &mut Rng) -> Self {
        LinearParams {
            weight: Matrix::randn(in_dim, out_dim, std, rng),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn forward(&self, input: &Matrix) -> Matrix {
        let mut out = input.matmul(&self.weight);
        out.add_row_broadcast(&self.bias);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub attn_norm: LayerNormParams,
    pub query: LinearParams,
    pub key: LinearParams,
    pub value: LinearParams,
    pub output: LinearParams,
    pub ff_norm: LayerNormParams,
    pub ff_in: LinearParams,
    pub ff_out: LinearParams,
}

/// All trainable tensors. The same structure doubles as the gradient holder
/// and the optimizer moment store, addressed through the flat tensor list
/// (`tensor_count` / `tensor` / `tensor_mut`).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: EncoderConfig,
    pub token_embedding: Matrix,
    pub position_embedding: Matrix,
    pub layers: Vec<LayerParams>,
    pub final_norm: LayerNormParams,
    pub punct_head: LinearParams,
    pub case_head: LinearParams,
    pub mlm_head: LinearParams,
}

const ENCODER_INIT_STD: f64 = 0.02;

impl ModelParameters {
    /// Random initialization: encoder weights at the usual 0.02 std, heads
    /// much smaller so fresh models start at near-uniform output
    /// distributions, norm gains at one.
    pub fn init(config: &EncoderConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = Rng::seed(seed);
        let d = config.hidden_dim;
        let head_std = |fan_in: usize| 0.01 / libm::sqrt(fan_in as f64);
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                attn_norm: LayerNormParams::ones(d),
                query: LinearParams::randn(d, d, ENCODER_INIT_STD, &mut rng),
                key: LinearParams::randn(d, d, ENCODER_INIT_STD, &mut rng),
                value: LinearParams::randn(d, d, ENCODER_INIT_STD, &mut rng),
                output: LinearParams::randn(d, d, ENCODER_INIT_STD, &mut rng),
                ff_norm: LayerNormParams::ones(d),
                ff_in: LinearParams::randn(d, config.ff_dim, ENCODER_INIT_STD, &mut rng),
                ff_out: LinearParams::randn(config.ff_dim, d, ENCODER_INIT_STD, &mut rng),
            })
            .collect();
        Ok(ModelParameters {
            token_embedding: Matrix::randn(config.vocab_size, d, ENCODER_INIT_STD, &mut rng),
            position_embedding: Matrix::randn(config.max_seq_len, d, ENCODER_INIT_STD, &mut rng),
            layers,
            final_norm: LayerNormParams::ones(d),
            punct_head: LinearParams::randn(d, PUNCT_CLASSES, head_std(d), &mut rng),
            case_head: LinearParams::randn(
                PUNCT_CLASSES + d,
                CASE_CLASSES,
                head_std(PUNCT_CLASSES + d),
                &mut rng,
            ),
            mlm_head: LinearParams::randn(d, config.vocab_size, head_std(d), &mut rng),
            config: config.clone(),
        })
    }

    /// All-zero tensors with the same shapes; used for gradients and
    /// optimizer state.
    pub fn zeros(config: &EncoderConfig) -> Self {
        let d = config.hidden_dim;
        let layers = (0..config.num_layers)
            .map(|_| LayerParams {
                attn_norm: LayerNormParams::zeros(d),
                query: LinearParams::zeros(d, d),
                key: LinearParams::zeros(d, d),
                value: LinearParams::zeros(d, d),
                output: LinearParams::zeros(d, d),
                ff_norm: LayerNormParams::zeros(d),
                ff_in: LinearParams::zeros(d, config.ff_dim),
                ff_out: LinearParams::zeros(config.ff_dim, d),
            })
            .collect();
        ModelParameters {
            token_embedding: Matrix::zeros(config.vocab_size, d),
            position_embedding: Matrix::zeros(config.max_seq_len, d),
            layers,
            final_norm: LayerNormParams::zeros(d),
            punct_head: LinearParams::zeros(d, PUNCT_CLASSES),
            case_head: LinearParams::zeros(PUNCT_CLASSES + d, CASE_CLASSES),
            mlm_head: LinearParams::zeros(d, config.vocab_size),
            config: config.clone(),
        }
    }

    /// Keeps the embeddings, the first `keep` encoder layers, the final norm
    /// and all heads; drops the remaining layers.
    pub fn truncate(&self, keep: usize) -> Result<ModelParameters, ModelError> {
        if keep == 0 || keep > self.layers.len() {
            return Err(ModelError::InvalidTruncation {
                keep,
                layers: self.layers.len(),
            });
        }
        let mut out = self.clone();
        out.layers.truncate(keep);
        out.config.num_layers = keep;
        Ok(out)
    }

    const TENSORS_PER_LAYER: usize = 16;
    const HEAD_TENSORS: usize = 6;

    pub fn tensor_count(&self) -> usize {
        2 + self.layers.len() * Self::TENSORS_PER_LAYER + 2 + Self::HEAD_TENSORS
    }

    pub fn tensor_name(&self, t: usize) -> String {
        use alloc::format;
        match self.locate(t) {
            Slot::TokenEmbedding => "token_embedding".into(),
            Slot::PositionEmbedding => "position_embedding".into(),
            Slot::Layer(l, i) => {
                let field = [
                    "attn_norm.gain",
                    "attn_norm.bias",
                    "query.weight",
                    "query.bias",
                    "key.weight",
                    "key.bias",
                    "value.weight",
                    "value.bias",
                    "output.weight",
                    "output.bias",
                    "ff_norm.gain",
                    "ff_norm.bias",
                    "ff_in.weight",
                    "ff_in.bias",
                    "ff_out.weight",
                    "ff_out.bias",
                ][i];
                format!("layer.{l}.{field}")
            }
            Slot::FinalNorm(0) => "final_norm.gain".into(),
            Slot::FinalNorm(_) => "final_norm.bias".into(),
            Slot::Head(i) => [
                "punct_head.weight",
                "punct_head.bias",
                "case_head.weight",
                "case_head.bias",
                "mlm_head.weight",
                "mlm_head.bias",
            ][i]
                .into(),
        }
    }

    pub fn tensor(&self, t: usize) -> &[f64] {
        match self.locate(t) {
            Slot::TokenEmbedding => &self.token_embedding.data,
            Slot::PositionEmbedding => &self.position_embedding.data,
            Slot::Layer(l, i) => {
                let layer = &self.layers[l];
                match i {
                    0 => &layer.attn_norm.gain,
                    1 => &layer.attn_norm.bias,
                    2 => &layer.query.weight.data,
                    3 => &layer.query.bias,
                    4 => &layer.key.weight.data,
                    5 => &layer.key.bias,
                    6 => &layer.value.weight.data,
                    7 => &layer.value.bias,
                    8 => &layer.output.weight.data,
                    9 => &layer.output.bias,
                    10 => &layer.ff_norm.gain,
                    11 => &layer.ff_norm.bias,
                    12 => &layer.ff_in.weight.data,
                    13 => &layer.ff_in.bias,
                    14 => &layer.ff_out.weight.data,
                    _ => &layer.ff_out.bias,
                }
            }
            Slot::FinalNorm(0) => &self.final_norm.gain,
            Slot::FinalNorm(_) => &self.final_norm.bias,
            Slot::Head(i) => match i {
                0 => &self.punct_head.weight.data,
                1 => &self.punct_head.bias,
                2 => &self.case_head.weight.data,
                3 => &self.case_head.bias,
                4 => &self.mlm_head.weight.data,
                _ => &self.mlm_head.bias,
            },
        }
    }

    pub fn tensor_mut(&mut self, t: usize) -> &mut [f64] {
        match self.locate(t) {
            Slot::TokenEmbedding => &mut self.token_embedding.data,
            Slot::PositionEmbedding => &mut self.position_embedding.data,
            Slot::Layer(l, i) => {
                let layer = &mut self.layers[l];
                match i {
                    0 => &mut layer.attn_norm.gain,
                    1 => &mut layer.attn_norm.bias,
                    2 => &mut layer.query.weight.data,
                    3 => &mut layer.query.bias,
                    4 => &mut layer.key.weight.data,
                    5 => &mut layer.key.bias,
                    6 => &mut layer.value.weight.data,
                    7 => &mut layer.value.bias,
                    8 => &mut layer.output.weight.data,
                    9 => &mut layer.output.bias,
                    10 => &mut layer.ff_norm.gain,
                    11 => &mut layer.ff_norm.bias,
                    12 => &mut layer.ff_in.weight.data,
                    13 => &mut layer.ff_in.bias,
                    14 => &mut layer.ff_out.weight.data,
                    _ => &mut layer.ff_out.bias,
                }
            }
            Slot::FinalNorm(0) => &mut self.final_norm.gain,
            Slot::FinalNorm(_) => &mut self.final_norm.bias,
            Slot::Head(i) => match i {
                0 => &mut self.punct_head.weight.data,
                1 => &mut self.punct_head.bias,
                2 => &mut self.case_head.weight.data,
                3 => &mut self.case_head.bias,
                4 => &mut self.mlm_head.weight.data,
                _ => &mut self.mlm_head.bias,
            },
        }
    }

    fn locate(&self, t: usize) -> Slot {
        if t == 0 {
            return Slot::TokenEmbedding;
        }
        if t == 1 {
            return Slot::PositionEmbedding;
        }
        let mut t = t - 2;
        if t < self.layers.len() * Self::TENSORS_PER_LAYER {
            return Slot::Layer(t / Self::TENSORS_PER_LAYER, t % Self::TENSORS_PER_LAYER);
        }
        t -= self.layers.len() * Self::TENSORS_PER_LAYER;
        if t < 2 {
            return Slot::FinalNorm(t);
        }
        Slot::Head(t - 2)
    }

    /// Whether a tensor is a weight matrix (subject to weight decay) as
    /// opposed to a bias or norm parameter.
    pub fn tensor_is_weight(&self, t: usize) -> bool {
        match self.locate(t) {
            Slot::TokenEmbedding | Slot::PositionEmbedding => true,
            Slot::Layer(_, i) => matches!(i, 2 | 4 | 6 | 8 | 12 | 14),
            Slot::FinalNorm(_) => false,
            Slot::Head(i) => matches!(i, 0 | 2 | 4),
        }
    }

    pub fn num_parameters(&self) -> usize {
        (0..self.tensor_count()).map(|t| self.tensor(t).len()).sum()
    }
}

enum Slot {
    TokenEmbedding,
    PositionEmbedding,
    Layer(usize, usize),
    FinalNorm(usize),
    Head(usize),
}

/// Encoder output: one row per input piece.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    pub states: Matrix,
}

impl HiddenStates {
    pub fn len(&self) -> usize {
        self.states.rows
    }

    pub fn is_empty(&self) -> bool {
        self.states.rows == 0
    }
}

impl ModelParameters {
    /// Runs the encoder over a piece sequence. Positions at or beyond
    /// `valid_len` (padding) are masked out of attention.
    pub fn encode_padded(
        &self,
        piece_ids: &[u32],
        valid_len: usize,
    ) -> Result<HiddenStates, ModelError> {
        let trace = backprop::forward(self, piece_ids, valid_len, None)?;
        Ok(HiddenStates {
            states: trace.hidden,
        })
    }

    pub fn encode(&self, piece_ids: &[u32]) -> Result<HiddenStates, ModelError> {
        self.encode_padded(piece_ids, piece_ids.len())
    }

    /// Per-piece punctuation distributions.
    pub fn punct_head_probs(&self, hidden: &HiddenStates) -> Matrix {
        let mut logits = self.punct_head.forward(&hidden.states);
        softmax_rows(&mut logits);
        logits
    }

    /// Per-piece casing distributions conditioned on the punctuation
    /// distribution (probabilities, not hard labels).
    pub fn case_head_probs(&self, hidden: &HiddenStates, punct_probs: &Matrix) -> Matrix {
        debug_assert_eq!(hidden.states.rows, punct_probs.rows);
        let joined = concat_cols(punct_probs, &hidden.states);
        let mut logits = self.case_head.forward(&joined);
        softmax_rows(&mut logits);
        logits
    }

    /// Per-piece vocabulary distributions from the masked-token head.
    pub fn mlm_head_probs(&self, hidden: &HiddenStates) -> Matrix {
        let mut logits = self.mlm_head.forward(&hidden.states);
        softmax_rows(&mut logits);
        logits
    }
}

/// Column-wise concatenation `[left | right]`.
pub(crate) fn concat_cols(left: &Matrix, right: &Matrix) -> Matrix {
    debug_assert_eq!(left.rows, right.rows);
    let mut out = Matrix::zeros(left.rows, left.cols + right.cols);
    for r in 0..left.rows {
        let dst = out.row_mut(r);
        dst[..left.cols].copy_from_slice(left.row(r));
        dst[left.cols..].copy_from_slice(right.row(r));
    }
    out
}

/// The weighted two-task loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointLoss {
    pub total: f64,
    pub punct: f64,
    pub case: f64,
}

/// Mean cross-entropy of the two heads over supervised positions, combined
/// as `alpha * punct + case`. `None` labels are excluded from both sums.
pub fn joint_loss(
    punct_probs: &Matrix,
    case_probs: &Matrix,
    punct_labels: &[Option<usize>],
    case_labels: &[Option<usize>],
    alpha: f64,
) -> Result<JointLoss, ModelError> {
    let punct = mean_nll(punct_probs, punct_labels)?;
    let case = mean_nll(case_probs, case_labels)?;
    Ok(JointLoss {
        total: alpha * punct + case,
        punct,
        case,
    })
}

fn mean_nll(probs: &Matrix, labels: &[Option<usize>]) -> Result<f64, ModelError> {
    debug_assert_eq!(probs.rows, labels.len());
    let mut sum = 0.0;
    let mut count = 0usize;
    for (r, label) in labels.iter().enumerate() {
        if let Some(class) = label {
            let p = probs.at(r, *class).max(f64::MIN_POSITIVE);
            sum -= libm::log(p);
            count += 1;
        }
    }
    if count == 0 {
        return Err(ModelError::NoSupervision);
    }
    Ok(sum / count as f64)
}
