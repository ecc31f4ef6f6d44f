//! Turning a trained generator into an estimate of the system language.
//!
//! Naive sampling dedups `k` independent generator draws. The MH variant runs
//! an independence Metropolis–Hastings chain whose proposals are generator
//! draws and whose acceptance uses discriminator odds `D / (1 - D)`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{Discriminator, DiscriminatorScore, TrainedGenerator};
use crate::seed::derive_seed;
use crate::variant::{Decoded, UniqueVariantLog, Variant};

/// Draws per independently seeded naive-sampling chunk.
const NAIVE_CHUNK: usize = 1024;

pub const DEFAULT_BURN_IN: usize = 50;
pub const DEFAULT_THINNING: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMode {
    Naive,
    Mh,
}

impl std::fmt::Display for SampleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SampleMode::Naive => "naive",
            SampleMode::Mh => "mh",
        })
    }
}

impl std::str::FromStr for SampleMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(SampleMode::Naive),
            "mh" => Ok(SampleMode::Mh),
            other => Err(Error::InvalidVariant(format!(
                "unknown sampling mode `{other}`"
            ))),
        }
    }
}

/// Chain diagnostics of an MH run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub burn_in: usize,
    pub thinning: usize,
    pub proposals: u64,
    pub accepted: u64,
    /// Proposals that did not decode and were discarded.
    pub undecodable_proposals: u64,
    pub acceptance_rate: f64,
    /// No proposal ever decoded; the chain never left its initial state.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub mode: SampleMode,
    pub draws: u64,
    pub rejected: u64,
    pub frequency: BTreeMap<Variant, u64>,
    pub chain: Option<ChainStats>,
}

impl SampleSet {
    fn from_decoded(mode: SampleMode, decoded: impl IntoIterator<Item = Decoded>) -> Self {
        let mut set = SampleSet {
            mode,
            draws: 0,
            rejected: 0,
            frequency: BTreeMap::new(),
            chain: None,
        };
        for d in decoded {
            set.record(d.into_variant());
        }
        set
    }

    fn record(&mut self, v: Option<Variant>) {
        self.draws += 1;
        match v {
            Some(v) => *self.frequency.entry(v).or_insert(0) += 1,
            None => self.rejected += 1,
        }
    }

    /// A sample set holding every variant of `log` once; bypasses any
    /// generator.
    pub fn from_log(log: &UniqueVariantLog) -> Self {
        SampleSet::from_decoded(SampleMode::Naive, log.iter().cloned().map(Decoded::Variant))
    }

    pub fn unique(&self) -> UniqueVariantLog {
        self.frequency.keys().cloned().collect()
    }

    pub fn unique_count(&self) -> usize {
        self.frequency.len()
    }

    pub fn rejection_rate(&self) -> f64 {
        if self.draws == 0 {
            0.0
        } else {
            self.rejected as f64 / self.draws as f64
        }
    }

    /// Metadata sidecar written next to sampled variant files.
    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "mode": self.mode,
            "draws": self.draws,
            "rejected": self.rejected,
            "rejection_rate": self.rejection_rate(),
            "unique": self.unique_count(),
            "chain": self.chain,
        })
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        Err(Error::InvalidVariant(
            "sample count k must be at least 1".into(),
        ))
    } else {
        Ok(())
    }
}

/// `k` generator draws. Draws come in fixed-size chunks, each from its own
/// derived stream, so the first `k` draws of a larger run are exactly the
/// draws of a run with `k`.
pub fn naive_sample(gen: &TrainedGenerator, k: usize, seed: u64) -> Result<SampleSet> {
    check_k(k)?;
    let chunks: Vec<Vec<Decoded>> = (0..k.div_ceil(NAIVE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sample/naive", c as u64));
            let n = NAIVE_CHUNK.min(k - c * NAIVE_CHUNK);
            (0..n).map(|_| gen.draw(&mut rng)).collect()
        })
        .collect();
    Ok(SampleSet::from_decoded(
        SampleMode::Naive,
        chunks.into_iter().flatten(),
    ))
}

/// Probability of moving from a state scored `current` to one scored
/// `proposed` under an independence sampler with odds weights.
pub fn acceptance_probability(current: DiscriminatorScore, proposed: DiscriminatorScore) -> f64 {
    (proposed.odds() / current.odds()).min(1.0)
}

/// MH refinement using the generator's own discriminator.
pub fn mh_sample(
    gen: &TrainedGenerator,
    k: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<SampleSet> {
    mh_sample_with(gen, gen, k, burn_in, thinning, seed)
}

pub fn mh_sample_with(
    gen: &TrainedGenerator,
    disc: &dyn Discriminator,
    k: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<SampleSet> {
    mh_chain(|rng| gen.draw(rng), disc, k, burn_in, thinning, seed)
}

fn mh_chain(
    mut propose: impl FnMut(&mut ChaCha8Rng) -> Decoded,
    disc: &dyn Discriminator,
    k: usize,
    burn_in: usize,
    thinning: usize,
    seed: u64,
) -> Result<SampleSet> {
    check_k(k)?;
    if thinning == 0 {
        return Err(Error::InvalidVariant("thinning must be at least 1".into()));
    }
    let mut proposal_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sample/mh/proposal", 0));
    let mut accept_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "sample/mh/accept", 0));
    let mut scores: HashMap<Variant, DiscriminatorScore> = HashMap::new();
    let mut score = |v: &Variant| -> Result<DiscriminatorScore> {
        if let Some(&s) = scores.get(v) {
            return Ok(s);
        }
        let s = disc.score(v)?;
        scores.insert(v.clone(), s);
        Ok(s)
    };

    let mut stats = ChainStats {
        burn_in,
        thinning,
        proposals: 0,
        accepted: 0,
        undecodable_proposals: 0,
        acceptance_rate: 0.0,
        degenerate: true,
    };
    let mut state: Option<(Variant, DiscriminatorScore)> = match propose(&mut proposal_rng) {
        Decoded::Variant(v) => {
            let s = score(&v)?;
            Some((v, s))
        }
        Decoded::Rejected(_) => None,
    };
    let mut set = SampleSet::from_decoded(SampleMode::Mh, std::iter::empty());
    let mut step = 0usize;
    while set.draws < k as u64 {
        let proposal = propose(&mut proposal_rng);
        let u: f64 = accept_rng.gen();
        stats.proposals += 1;
        match proposal {
            Decoded::Rejected(_) => stats.undecodable_proposals += 1,
            Decoded::Variant(v) => {
                let s = score(&v)?;
                let alpha = match &state {
                    None => 1.0,
                    Some((_, cur)) => acceptance_probability(*cur, s),
                };
                if u < alpha {
                    stats.accepted += 1;
                    state = Some((v, s));
                }
            }
        }
        step += 1;
        if step > burn_in && (step - burn_in - 1) % thinning == 0 {
            set.record(state.as_ref().map(|(v, _)| v.clone()));
        }
    }
    stats.degenerate = state.is_none();
    stats.acceptance_rate = stats.accepted as f64 / stats.proposals as f64;
    set.chain = Some(stats);
    Ok(set)
}

/// Scores every variant at the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantDiscriminator(pub f64);

impl Discriminator for ConstantDiscriminator {
    fn score(&self, _: &Variant) -> Result<DiscriminatorScore> {
        Ok(DiscriminatorScore::new(self.0))
    }
}
