//! Partitioning a system variant set into an observed log and held-out
//! variants, either by random ratio or by one of the length-biased setups.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::petri::SystemVariantSet;
use crate::seed::{derive_seed, rng_from_seed};
use crate::variant::{UniqueVariantLog, Variant};

/// Share of the system variants that the biased setups put into the observed log.
pub const BIAS_OBSERVED_FRACTION: f64 = 0.7;
/// Default share of held-out variants exchanged by the leaky setups.
pub const DEFAULT_LEAK_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasSetup {
    /// Shortest 70% observed.
    B1,
    /// Longest 70% observed.
    B2,
    /// B1 with leaked exchanges.
    B3,
    /// B2 with leaked exchanges.
    B4,
}

impl BiasSetup {
    pub const ALL: [BiasSetup; 4] = [BiasSetup::B1, BiasSetup::B2, BiasSetup::B3, BiasSetup::B4];

    fn shortest_first(self) -> bool {
        matches!(self, BiasSetup::B1 | BiasSetup::B3)
    }

    fn leaky(self) -> bool {
        matches!(self, BiasSetup::B3 | BiasSetup::B4)
    }
}

impl fmt::Display for BiasSetup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BiasSetup::B1 => "b1",
            BiasSetup::B2 => "b2",
            BiasSetup::B3 => "b3",
            BiasSetup::B4 => "b4",
        };
        f.write_str(s)
    }
}

impl FromStr for BiasSetup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "b1" => Ok(BiasSetup::B1),
            "b2" => Ok(BiasSetup::B2),
            "b3" => Ok(BiasSetup::B3),
            "b4" => Ok(BiasSetup::B4),
            _ => Err(Error::Split(format!("unknown bias setup `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    RandomRatio { ratio: f64 },
    Bias { setup: BiasSetup },
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitKind::RandomRatio { ratio } => {
                let pct = (ratio * 100.0).round() as i64;
                write!(f, "{}/{}", pct, 100 - pct)
            }
            SplitKind::Bias { setup } => write!(f, "{setup}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub kind: SplitKind,
    pub seed: u64,
    /// Guarantee a maximum-length variant in the observed log for random
    /// splits. The biased setups always guarantee it.
    #[serde(default = "default_true")]
    pub enforce_max_length: bool,
    #[serde(default = "default_leak")]
    pub leak_fraction: f64,
}

fn default_true() -> bool {
    true
}

fn default_leak() -> f64 {
    DEFAULT_LEAK_FRACTION
}

impl SplitSpec {
    pub fn ratio(ratio: f64, seed: u64) -> Self {
        SplitSpec {
            kind: SplitKind::RandomRatio { ratio },
            seed,
            enforce_max_length: true,
            leak_fraction: DEFAULT_LEAK_FRACTION,
        }
    }

    pub fn bias(setup: BiasSetup, seed: u64) -> Self {
        SplitSpec {
            kind: SplitKind::Bias { setup },
            seed,
            enforce_max_length: true,
            leak_fraction: DEFAULT_LEAK_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub observed: UniqueVariantLog,
    pub heldout: UniqueVariantLog,
    pub spec: SplitSpec,
    pub system: String,
}

/// JSON sidecar written next to split variant files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub system: String,
    pub spec: SplitSpec,
    pub seed: u64,
    pub sizes: SplitSizes,
    pub means: SplitMeans,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub system: usize,
    pub observed: usize,
    pub heldout: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitMeans {
    pub observed: f64,
    pub heldout: f64,
}

impl SplitResult {
    pub fn summary(&self) -> SplitSummary {
        SplitSummary {
            system: self.system.clone(),
            spec: self.spec,
            seed: self.spec.seed,
            sizes: SplitSizes {
                system: self.observed.len() + self.heldout.len(),
                observed: self.observed.len(),
                heldout: self.heldout.len(),
            },
            means: SplitMeans {
                observed: self.observed.mean_len().unwrap_or(f64::NAN),
                heldout: self.heldout.mean_len().unwrap_or(f64::NAN),
            },
        }
    }
}

/// `round_half_up(ratio · n)`, evaluated on the ratio rounded to nine
/// decimals so that e.g. `0.3 · 415 = 124.5` rounds up despite binary
/// floating point.
pub fn observed_count(n: usize, ratio: f64) -> Result<usize> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Split(format!("ratio {ratio} is not in (0, 1)")));
    }
    const SCALE: u128 = 1_000_000_000;
    let num = (ratio * SCALE as f64).round() as u128;
    Ok(((num * n as u128 + SCALE / 2) / SCALE) as usize)
}

pub fn split(vs: &SystemVariantSet, spec: &SplitSpec, system: &str) -> Result<SplitResult> {
    match spec.kind {
        SplitKind::RandomRatio { ratio } => random_ratio_split(vs, ratio, spec, system),
        SplitKind::Bias { setup } => bias_split(vs, setup, spec, system),
    }
}

fn check_sizes(n: usize, observed: usize) -> Result<()> {
    if observed == 0 || observed >= n {
        return Err(Error::Split(format!(
            "split of {n} variants would leave {observed} observed and {} held out",
            n.saturating_sub(observed)
        )));
    }
    Ok(())
}

fn finish(
    observed: Vec<Variant>,
    heldout: Vec<Variant>,
    spec: &SplitSpec,
    system: &str,
) -> SplitResult {
    SplitResult {
        observed: observed.into_iter().collect(),
        heldout: heldout.into_iter().collect(),
        spec: *spec,
        system: system.to_string(),
    }
}

pub fn random_ratio_split(
    vs: &SystemVariantSet,
    ratio: f64,
    spec: &SplitSpec,
    system: &str,
) -> Result<SplitResult> {
    let n = vs.len();
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 variants, got {n}")));
    }
    let target = observed_count(n, ratio)?;
    check_sizes(n, target)?;

    let mut rng = rng_from_seed(derive_seed(spec.seed, "split/ratio", 0));
    let mut all: Vec<Variant> = vs.variants.iter().cloned().collect();
    all.shuffle(&mut rng);
    let mut heldout = all.split_off(target);
    let mut observed = all;

    if spec.enforce_max_length {
        let mu = vs.variants.max_len().unwrap_or(0);
        if !observed.iter().any(|v| v.len() == mu) {
            let long: Vec<usize> = (0..heldout.len())
                .filter(|&i| heldout[i].len() == mu)
                .collect();
            let h = long[rng.gen_range(0..long.len())];
            let o = rng.gen_range(0..observed.len());
            std::mem::swap(&mut observed[o], &mut heldout[h]);
        }
    }
    Ok(finish(observed, heldout, spec, system))
}

/// Orders variants by length (ascending or descending) and takes `count`
/// from the front. The length class straddling the cut is shuffled under
/// the seed, starting from lexicographic order.
fn take_by_length(
    vs: &UniqueVariantLog,
    count: usize,
    shortest_first: bool,
    rng: &mut impl Rng,
) -> (Vec<Variant>, Vec<Variant>) {
    let mut sorted: Vec<Variant> = vs.iter().cloned().collect();
    // Stable sort keeps lexicographic order within equal lengths.
    if shortest_first {
        sorted.sort_by_key(Variant::len);
    } else {
        sorted.sort_by_key(|v| std::cmp::Reverse(v.len()));
    }
    let boundary_len = sorted[count - 1].len();
    let start = sorted
        .iter()
        .position(|v| v.len() == boundary_len)
        .unwrap_or(0);
    let end = sorted
        .iter()
        .rposition(|v| v.len() == boundary_len)
        .map_or(start, |e| e + 1);
    sorted[start..end].shuffle(rng);
    let rest = sorted.split_off(count);
    (sorted, rest)
}

pub fn bias_split(
    vs: &SystemVariantSet,
    setup: BiasSetup,
    spec: &SplitSpec,
    system: &str,
) -> Result<SplitResult> {
    let n = vs.len();
    if n < 2 {
        return Err(Error::Split(format!("need at least 2 variants, got {n}")));
    }
    if !(0.0..=1.0).contains(&spec.leak_fraction) {
        return Err(Error::Split(format!(
            "leak fraction {} is not in [0, 1]",
            spec.leak_fraction
        )));
    }
    let target = observed_count(n, BIAS_OBSERVED_FRACTION)?;
    check_sizes(n, target)?;
    let mu = vs.variants.max_len().unwrap_or(0);

    let mut tie_rng = rng_from_seed(derive_seed(spec.seed, "split/ties", 0));
    let (mut observed, mut heldout) =
        take_by_length(&vs.variants, target, setup.shortest_first(), &mut tie_rng);

    let mut pick_rng = rng_from_seed(derive_seed(spec.seed, "split/max-length", 0));
    let protected: Variant = match observed.iter().position(|v| v.len() == mu) {
        Some(_) => {
            let long: Vec<&Variant> = observed.iter().filter(|v| v.len() == mu).collect();
            long[pick_rng.gen_range(0..long.len())].clone()
        }
        None => {
            let long: Vec<usize> = (0..heldout.len())
                .filter(|&i| heldout[i].len() == mu)
                .collect();
            let v = heldout.remove(long[pick_rng.gen_range(0..long.len())]);
            observed.push(v.clone());
            v
        }
    };
    if heldout.is_empty() {
        return Err(Error::Split(format!(
            "bias setup {setup} on {n} variants leaves no held-out variants"
        )));
    }

    if setup.leaky() {
        let swaps = (spec.leak_fraction * heldout.len() as f64 + 1e-9).floor() as usize;
        let mut rng = rng_from_seed(derive_seed(spec.seed, "split/leak", 0));
        // Indices still eligible for an exchange on each side.
        let mut obs_pool: Vec<usize> = (0..observed.len())
            .filter(|&i| observed[i] != protected)
            .collect();
        let mut held_pool: Vec<usize> = (0..heldout.len()).collect();
        for _ in 0..swaps.min(obs_pool.len()).min(held_pool.len()) {
            let o = obs_pool.swap_remove(rng.gen_range(0..obs_pool.len()));
            let h = held_pool.swap_remove(rng.gen_range(0..held_pool.len()));
            std::mem::swap(&mut observed[o], &mut heldout[h]);
        }
    }
    Ok(finish(observed, heldout, spec, system))
}
