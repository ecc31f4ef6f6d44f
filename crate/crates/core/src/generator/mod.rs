//! Sequence generators trained on an observed log.
//!
//! [`GanModel`] is the adversarial generator; [`MarkovModel`] is an n-gram
//! baseline exposing the same sampling and scoring interface through
//! [`TrainedGenerator`].

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::variant::{Decoded, TokenCodec, UniqueVariantLog, Variant};

mod gan;
mod markov;

pub use gan::{inverse_temperature, EpochRecord, GanModel, Phase};
pub use markov::MarkovModel;

/// Longest variant a generator accepts for training.
pub const MAX_TRAIN_LEN: usize = 64;

/// Discriminator outputs are kept inside `[SCORE_EPS, 1 - SCORE_EPS]`.
pub const SCORE_EPS: f64 = 1e-6;

/// Shape of the inverse-temperature ramp during adversarial training.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemperatureSchedule {
    #[default]
    Exponential,
    Linear,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    /// Final inverse temperature of the relaxed outputs.
    pub beta: f64,
    pub seed: u64,
    /// Adversarial epochs.
    pub epochs: usize,
    pub pretrain_epochs: usize,
    pub embedding_dim: usize,
    pub hidden_dim: usize,
    /// Step size of maximum-likelihood pretraining.
    pub learning_rate: f64,
    /// Step size of both networks during the adversarial phase.
    pub adversarial_learning_rate: f64,
    pub batch_size: usize,
    pub schedule: TemperatureSchedule,
    pub clip_norm: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            beta: 100.0,
            seed: 0,
            epochs: 150,
            pretrain_epochs: 50,
            embedding_dim: 32,
            hidden_dim: 64,
            learning_rate: 1e-3,
            adversarial_learning_rate: 1e-4,
            batch_size: 32,
            schedule: TemperatureSchedule::Exponential,
            clip_norm: 5.0,
        }
    }
}

impl GeneratorConfig {
    /// A compact configuration for toy logs.
    pub fn small(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            epochs: 200,
            pretrain_epochs: 100,
            embedding_dim: 8,
            hidden_dim: 16,
            learning_rate: 1e-2,
            batch_size: 16,
            ..GeneratorConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Generator(format!("{what} must be positive")));
        if !(self.beta.is_finite() && self.beta > 0.0) {
            return bad("beta");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate");
        }
        if !(self.adversarial_learning_rate.is_finite() && self.adversarial_learning_rate > 0.0) {
            return bad("adversarial_learning_rate");
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm");
        }
        if self.embedding_dim == 0 {
            return bad("embedding_dim");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim");
        }
        if self.batch_size == 0 {
            return bad("batch_size");
        }
        Ok(())
    }
}

/// Probability assigned by a discriminator that a variant is real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct DiscriminatorScore(f64);

impl DiscriminatorScore {
    pub fn new(p: f64) -> Self {
        DiscriminatorScore(p.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Importance weight `D / (1 - D)`.
    pub fn odds(self) -> f64 {
        self.0 / (1.0 - self.0)
    }
}

/// Anything that can score a variant as real or generated.
pub trait Discriminator {
    fn score(&self, v: &Variant) -> Result<DiscriminatorScore>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedGenerator {
    Gan(GanModel),
    Markov(MarkovModel),
}

impl TrainedGenerator {
    pub fn train_gan(log: &UniqueVariantLog, config: &GeneratorConfig) -> Result<Self> {
        GanModel::train(log, config).map(TrainedGenerator::Gan)
    }

    pub fn train_markov(log: &UniqueVariantLog, order: usize, smoothing: f64) -> Result<Self> {
        MarkovModel::train(log, order, smoothing).map(TrainedGenerator::Markov)
    }

    pub fn codec(&self) -> &TokenCodec {
        match self {
            TrainedGenerator::Gan(m) => m.codec(),
            TrainedGenerator::Markov(m) => m.codec(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TrainedGenerator::Gan(_) => "gan",
            TrainedGenerator::Markov(_) => "markov",
        }
    }

    /// One raw token sequence of width `codec().width()`.
    pub fn draw_tokens(&self, rng: &mut ChaCha8Rng) -> Vec<u32> {
        match self {
            TrainedGenerator::Gan(m) => m.sample_tokens(rng),
            TrainedGenerator::Markov(m) => m.sample_tokens(rng),
        }
    }

    pub fn draw(&self, rng: &mut ChaCha8Rng) -> Decoded {
        self.codec().decode(&self.draw_tokens(rng))
    }

    /// `n` independent draws from a stream derived from `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Decoded> {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "generator/sample", 0));
        (0..n).map(|_| self.draw(&mut rng)).collect()
    }

    pub fn discriminator_score(&self, v: &Variant) -> Result<DiscriminatorScore> {
        match self {
            TrainedGenerator::Gan(m) => m.discriminator_score(v),
            TrainedGenerator::Markov(m) => m.discriminator_score(v),
        }
    }

    pub fn training_log(&self) -> &[EpochRecord] {
        match self {
            TrainedGenerator::Gan(m) => m.training_log(),
            TrainedGenerator::Markov(_) => &[],
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let ck = CheckpointRef {
            format: CHECKPOINT_FORMAT,
            version: CHECKPOINT_VERSION,
            model: self,
        };
        let text = serde_json::to_string(&ck)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&text)
    }

    pub fn from_checkpoint_str(text: &str) -> Result<Self> {
        let head: CheckpointHead = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable checkpoint: {e}")))?;
        if head.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unexpected format `{}`",
                head.format
            )));
        }
        if head.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported version {} (expected {CHECKPOINT_VERSION})",
                head.version
            )));
        }
        let ck: CheckpointOwned = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("corrupt checkpoint: {e}")))?;
        Ok(ck.model)
    }
}

impl Discriminator for TrainedGenerator {
    fn score(&self, v: &Variant) -> Result<DiscriminatorScore> {
        self.discriminator_score(v)
    }
}

const CHECKPOINT_FORMAT: &str = "vf-generator";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize)]
struct CheckpointRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a TrainedGenerator,
}

#[derive(Deserialize)]
struct CheckpointHead {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct CheckpointOwned {
    model: TrainedGenerator,
}
