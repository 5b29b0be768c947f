//! Pipeline configuration: a JSON file with documented defaults, overridable
//! field by field from command-line flags. Unknown keys are rejected so typos
//! fail loudly instead of silently running with defaults.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use puncase_core::model::EncoderConfig;
use puncase_core::tokenizer::TokenizerMode;
use puncase_core::training::{MaskingKind, MaskingPolicy, TrainConfig};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "PUNCASE_CONFIG";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// `word` or `subword`.
    pub tokenizer_mode: String,
    pub vocab_size: usize,
    pub min_frequency: u64,
    pub encoder: EncoderSection,
    pub training: TrainingSection,
    pub masking: MaskingSection,
    pub chunk_core: usize,
    pub chunk_overlap: usize,
    pub wer_threshold: f64,
    pub wer_test_n: usize,
    pub wer_dev_n: usize,
    pub nbest: usize,
    pub split_ratios: (f64, f64, f64),
    /// Overrides the built-in `[TAG]` PHI recognizer.
    pub phi_pattern: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderSection {
    pub num_layers: usize,
    pub hidden_dim: usize,
    pub num_heads: usize,
    pub ff_dim: usize,
    pub max_seq_len: usize,
    pub dropout_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub alpha: f64,
    pub gradient_clip_norm: f64,
    pub weight_decay: f64,
    pub patience: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct MaskingSection {
    /// `random` or `punct_selective`.
    pub policy: String,
    pub mask_fraction: f64,
    pub punct_share: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            tokenizer_mode: "subword".to_string(),
            vocab_size: 4000,
            min_frequency: 2,
            encoder: EncoderSection::default(),
            training: TrainingSection::default(),
            masking: MaskingSection::default(),
            chunk_core: 200,
            chunk_overlap: 50,
            wer_threshold: 0.25,
            wer_test_n: 50,
            wer_dev_n: 50,
            nbest: 1,
            split_ratios: (0.90, 0.05, 0.05),
            phi_pattern: None,
        }
    }
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection {
            num_layers: 4,
            hidden_dim: 64,
            num_heads: 4,
            ff_dim: 256,
            max_seq_len: 320,
            dropout_rate: 0.1,
        }
    }
}

impl Default for TrainingSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainingSection {
            batch_size: d.batch_size,
            learning_rate: d.learning_rate,
            epochs: d.epochs,
            alpha: d.alpha,
            gradient_clip_norm: d.gradient_clip_norm,
            weight_decay: d.weight_decay,
            patience: d.patience,
        }
    }
}

impl Default for MaskingSection {
    fn default() -> Self {
        MaskingSection {
            policy: "random".to_string(),
            mask_fraction: 0.15,
            punct_share: 0.5,
        }
    }
}

impl PipelineConfig {
    /// Loads from `--config`, else from `PUNCASE_CONFIG`, else the defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let path = match explicit {
            Some(p) => Some(p.to_path_buf()),
            None => std::env::var_os(CONFIG_ENV).map(std::path::PathBuf::from),
        };
        let config = match path {
            Some(path) => {
                let content = fs::read_to_string(&path)
                    .with_context(|| format!("cannot open config {}", path.display()))?;
                serde_json::from_str(&content)
                    .with_context(|| format!("invalid config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.mode()?;
        self.masking_policy()?;
        self.train_config()
            .validate()
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let (a, b, c) = self.split_ratios;
        if (a + b + c - 1.0).abs() > 1e-9 {
            bail!("split_ratios must sum to 1");
        }
        if self.chunk_core == 0 {
            bail!("chunk_core must be at least 1");
        }
        if self.chunk_core + 2 * self.chunk_overlap > self.encoder.max_seq_len {
            bail!(
                "chunk window {} + 2*{} exceeds encoder max_seq_len {}",
                self.chunk_core,
                self.chunk_overlap,
                self.encoder.max_seq_len
            );
        }
        if !(0.0..=1.0).contains(&self.wer_threshold) {
            bail!("wer_threshold must lie in [0, 1]");
        }
        if self.nbest > 5 {
            bail!("nbest is capped at 5");
        }
        if let Some(pattern) = &self.phi_pattern {
            regex::Regex::new(pattern).context("invalid phi_pattern")?;
        }
        Ok(())
    }

    pub fn mode(&self) -> Result<TokenizerMode> {
        parse_mode(&self.tokenizer_mode)
    }

    pub fn masking_policy(&self) -> Result<MaskingPolicy> {
        let kind = match self.masking.policy.as_str() {
            "random" => MaskingKind::Random,
            "punct_selective" => MaskingKind::PunctSelective,
            other => bail!("unknown masking policy {other:?} (random | punct_selective)"),
        };
        Ok(MaskingPolicy {
            kind,
            mask_fraction: self.masking.mask_fraction,
            punct_share: self.masking.punct_share,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.training.batch_size,
            learning_rate: self.training.learning_rate,
            epochs: self.training.epochs,
            alpha: self.training.alpha,
            gradient_clip_norm: self.training.gradient_clip_norm,
            weight_decay: self.training.weight_decay,
            seed: self.seed,
            patience: self.training.patience,
        }
    }

    pub fn encoder_config(&self, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            num_layers: self.encoder.num_layers,
            hidden_dim: self.encoder.hidden_dim,
            num_heads: self.encoder.num_heads,
            ff_dim: self.encoder.ff_dim,
            max_seq_len: self.encoder.max_seq_len,
            vocab_size,
            dropout_rate: self.encoder.dropout_rate,
        }
    }
}

pub fn parse_mode(mode: &str) -> Result<TokenizerMode> {
    match mode {
        "word" => Ok(TokenizerMode::Word),
        "subword" => Ok(TokenizerMode::Subword),
        other => bail!("unknown tokenizer mode {other:?} (word | subword)"),
    }
}
