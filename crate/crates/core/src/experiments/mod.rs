//! Sweeps over systems, splits, temperatures and sample sizes.
//!
//! A plan expands into *units*, one per (system, setup, β, replicate). Each
//! unit splits its system once, trains one generator, and then samples and
//! evaluates it at every `k` of the grid. Units run in parallel on the
//! current rayon pool; a failing unit produces error records for its grid
//! points and the sweep goes on.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generator::{GeneratorConfig, TrainedGenerator};
use crate::metrics::{evaluate, EvalResult};
use crate::petri::{enumerate_variants, read_net, PlayoutConfig, SystemVariantSet};
use crate::sampler::{mh_sample, naive_sample, SampleMode, DEFAULT_BURN_IN, DEFAULT_THINNING};
use crate::seed::{content_digest, derive_seed};
use crate::split::{split, BiasSetup, SplitKind, SplitSpec, DEFAULT_LEAK_FRACTION};
use crate::variant::read_variants;

mod report;
pub mod stats;

pub use report::{report, write_runs, write_runs_csv, RunManifest, RUNS_HEADER};
pub use stats::{ci90, ols_fit, CiResult, Expansion, RegressionFit};

/// Identifiers of the five ground-truth systems used by the default plans.
pub const DEFAULT_SYSTEMS: [&str; 5] = [
    "pb_system_1_5",
    "pb_system_2_4",
    "pb_system_3_6",
    "pb_system_4_1",
    "pb_system_5_3",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rq {
    #[serde(rename = "RQ1", alias = "rq1")]
    Rq1,
    #[serde(rename = "RQ2", alias = "rq2")]
    Rq2,
    #[serde(rename = "RQ3", alias = "rq3")]
    Rq3,
}

impl fmt::Display for Rq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Rq::Rq1 => "RQ1",
            Rq::Rq2 => "RQ2",
            Rq::Rq3 => "RQ3",
        })
    }
}

impl FromStr for Rq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RQ1" => Ok(Rq::Rq1),
            "RQ2" => Ok(Rq::Rq2),
            "RQ3" => Ok(Rq::Rq3),
            _ => Err(Error::Experiment(format!(
                "unknown research question `{s}`"
            ))),
        }
    }
}

/// One entry of the bias grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BiasChoice {
    /// The unbiased 70/30 random split.
    Baseline,
    Bias(BiasSetup),
}

impl fmt::Display for BiasChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BiasChoice::Baseline => f.write_str("baseline"),
            BiasChoice::Bias(b) => write!(f, "{b}"),
        }
    }
}

impl FromStr for BiasChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("baseline") {
            Ok(BiasChoice::Baseline)
        } else {
            s.parse().map(BiasChoice::Bias)
        }
    }
}

impl Serialize for BiasChoice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BiasChoice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Where a system's variant language comes from. Without explicit paths the
/// net is looked up as `<data dir>/<id>.pnml` (or `.json`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemRef {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub net: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variants: Option<PathBuf>,
}

impl SystemRef {
    pub fn named(id: impl Into<String>) -> Self {
        SystemRef {
            id: id.into(),
            net: None,
            variants: None,
        }
    }

    fn resolve_path(p: &Path, data_dir: Option<&Path>) -> PathBuf {
        match data_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Loads or enumerates the system's variant set.
    pub fn load(
        &self,
        data_dir: Option<&Path>,
        playout: &PlayoutConfig,
    ) -> Result<SystemVariantSet> {
        if let Some(v) = &self.variants {
            return read_variants(Self::resolve_path(v, data_dir))
                .map(SystemVariantSet::from_variants);
        }
        let net_path = match &self.net {
            Some(p) => Self::resolve_path(p, data_dir),
            None => {
                let dir = data_dir.ok_or_else(|| {
                    Error::Experiment(format!(
                        "system `{}` has no net path and no data directory is set",
                        self.id
                    ))
                })?;
                ["pnml", "json"]
                    .iter()
                    .map(|ext| dir.join(format!("{}.{ext}", self.id)))
                    .find(|p| p.exists())
                    .ok_or_else(|| {
                        Error::Experiment(format!(
                            "no net file for `{}` in {}",
                            self.id,
                            dir.display()
                        ))
                    })?
            }
        };
        enumerate_variants(&read_net(net_path)?, playout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GeneratorSpec {
    Gan {
        #[serde(default)]
        config: GeneratorConfig,
    },
    Markov {
        order: usize,
        #[serde(default)]
        smoothing: f64,
    },
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec::Gan {
            config: GeneratorConfig::default(),
        }
    }
}

/// A split setup of a grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Setup {
    Ratio(f64),
    Bias(BiasChoice),
}

impl Setup {
    fn split_kind(self) -> SplitKind {
        match self {
            Setup::Ratio(ratio) => SplitKind::RandomRatio { ratio },
            Setup::Bias(BiasChoice::Baseline) => SplitKind::RandomRatio { ratio: 0.7 },
            Setup::Bias(BiasChoice::Bias(setup)) => SplitKind::Bias { setup },
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Setup::Ratio(r) => write!(f, "{}", SplitKind::RandomRatio { ratio: *r }),
            Setup::Bias(b) => write!(f, "{b}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanFile")]
pub struct ExperimentPlan {
    pub rq: Rq,
    pub systems: Vec<SystemRef>,
    pub k_grid: Vec<usize>,
    pub ratio_grid: Vec<f64>,
    pub bias_grid: Vec<BiasChoice>,
    pub beta_grid: Vec<f64>,
    pub base_seed: u64,
    pub replicates: usize,
    pub generator: GeneratorSpec,
    pub mode: SampleMode,
    pub burn_in: usize,
    pub thinning: usize,
    /// Draw each `k` from its own stream instead of extending one stream.
    pub independent_draws: bool,
    /// Fill `wall_ms`; off by default so reruns are byte-identical.
    pub record_timing: bool,
    pub enforce_max_length: bool,
    pub leak_fraction: f64,
    pub playout: PlayoutConfig,
}

/// On-disk plan; missing grids take the defaults of the plan's `rq`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanFile {
    rq: Rq,
    systems: Option<Vec<SystemRef>>,
    k_grid: Option<Vec<usize>>,
    ratio_grid: Option<Vec<f64>>,
    bias_grid: Option<Vec<BiasChoice>>,
    beta_grid: Option<Vec<f64>>,
    base_seed: Option<u64>,
    replicates: Option<usize>,
    generator: Option<GeneratorSpec>,
    mode: Option<SampleMode>,
    burn_in: Option<usize>,
    thinning: Option<usize>,
    independent_draws: Option<bool>,
    record_timing: Option<bool>,
    enforce_max_length: Option<bool>,
    leak_fraction: Option<f64>,
    playout: Option<PlayoutConfig>,
}

impl TryFrom<PlanFile> for ExperimentPlan {
    type Error = Error;

    fn try_from(f: PlanFile) -> Result<Self> {
        let d = ExperimentPlan::default_for(f.rq);
        let plan = ExperimentPlan {
            rq: f.rq,
            systems: f.systems.unwrap_or(d.systems),
            k_grid: f.k_grid.unwrap_or(d.k_grid),
            ratio_grid: f.ratio_grid.unwrap_or(d.ratio_grid),
            bias_grid: f.bias_grid.unwrap_or(d.bias_grid),
            beta_grid: f.beta_grid.unwrap_or(d.beta_grid),
            base_seed: f.base_seed.unwrap_or(d.base_seed),
            replicates: f.replicates.unwrap_or(d.replicates),
            generator: f.generator.unwrap_or(d.generator),
            mode: f.mode.unwrap_or(d.mode),
            burn_in: f.burn_in.unwrap_or(d.burn_in),
            thinning: f.thinning.unwrap_or(d.thinning),
            independent_draws: f.independent_draws.unwrap_or(d.independent_draws),
            record_timing: f.record_timing.unwrap_or(d.record_timing),
            enforce_max_length: f.enforce_max_length.unwrap_or(d.enforce_max_length),
            leak_fraction: f.leak_fraction.unwrap_or(d.leak_fraction),
            playout: f.playout.unwrap_or(d.playout),
        };
        plan.validate()?;
        Ok(plan)
    }
}

impl ExperimentPlan {
    pub fn default_for(rq: Rq) -> Self {
        let k_grid = match rq {
            Rq::Rq1 => std::iter::once(1000)
                .chain((1..=10).map(|i| i * 2000))
                .collect(),
            Rq::Rq2 | Rq::Rq3 => vec![10_000],
        };
        ExperimentPlan {
            rq,
            systems: DEFAULT_SYSTEMS
                .iter()
                .map(|s| SystemRef::named(*s))
                .collect(),
            k_grid,
            ratio_grid: (1..=7).map(|i| i as f64 / 10.0).collect(),
            bias_grid: std::iter::once(BiasChoice::Baseline)
                .chain(BiasSetup::ALL.iter().map(|&b| BiasChoice::Bias(b)))
                .collect(),
            beta_grid: vec![100.0, 1000.0],
            base_seed: 0,
            replicates: 1,
            generator: GeneratorSpec::default(),
            mode: SampleMode::Naive,
            burn_in: DEFAULT_BURN_IN,
            thinning: DEFAULT_THINNING,
            independent_draws: false,
            record_timing: false,
            enforce_max_length: true,
            leak_fraction: DEFAULT_LEAK_FRACTION,
            playout: PlayoutConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Experiment(format!("invalid plan: {e}")))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::Experiment(format!("{what} must not be empty")));
        if self.systems.is_empty() {
            return empty("systems");
        }
        if self.k_grid.is_empty() {
            return empty("k_grid");
        }
        if self.beta_grid.is_empty() {
            return empty("beta_grid");
        }
        match self.rq {
            Rq::Rq2 if self.ratio_grid.is_empty() => return empty("ratio_grid"),
            Rq::Rq3 if self.bias_grid.is_empty() => return empty("bias_grid"),
            _ => {}
        }
        if self.replicates == 0 {
            return Err(Error::Experiment("replicates must be at least 1".into()));
        }
        if self.k_grid.contains(&0) {
            return Err(Error::Experiment("k values must be positive".into()));
        }
        if self.beta_grid.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(Error::Experiment("beta values must be positive".into()));
        }
        if self.thinning == 0 {
            return Err(Error::Experiment("thinning must be at least 1".into()));
        }
        Ok(())
    }

    /// Split setups swept by this plan's research question.
    pub fn setups(&self) -> Vec<Setup> {
        match self.rq {
            Rq::Rq1 => vec![Setup::Ratio(0.7)],
            Rq::Rq2 => self.ratio_grid.iter().map(|&r| Setup::Ratio(r)).collect(),
            Rq::Rq3 => self.bias_grid.iter().map(|&b| Setup::Bias(b)).collect(),
        }
    }

    /// Number of generators the plan trains.
    pub fn generator_count(&self) -> usize {
        self.systems.len() * self.setups().len() * self.beta_grid.len() * self.replicates
    }

    /// Number of records the plan produces.
    pub fn record_count(&self) -> usize {
        self.generator_count() * self.k_grid.len()
    }

    /// Digest of the plan's canonical JSON form.
    pub fn digest(&self) -> String {
        content_digest(
            serde_json::to_string(self)
                .expect("plan serializes")
                .as_bytes(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub split: u64,
    pub train: u64,
    pub sample: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub system: String,
    /// Empty for single pipeline runs.
    pub rq: Option<Rq>,
    pub setup: String,
    pub beta: f64,
    pub k: usize,
    pub mode: SampleMode,
    pub replicate: usize,
    pub generator: String,
    pub seeds: RunSeeds,
    /// Longest variant of the system.
    pub system_max_len: Option<usize>,
    /// Digest of the observed log the generator was trained on.
    pub observed_digest: Option<String>,
    pub eval: Option<EvalResult>,
    pub error: Option<String>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub records: Vec<RunRecord>,
    pub generators_trained: usize,
    /// Digest of each system's variant set, in plan order.
    pub system_digests: Vec<(String, Option<String>)>,
}

struct Unit<'a> {
    system: &'a str,
    vs: std::result::Result<&'a SystemVariantSet, String>,
    setup: Setup,
    beta: f64,
    replicate: usize,
}

fn unit_label(system: &str, setup: Setup) -> String {
    format!("{system}/{setup}")
}

/// Runs a plan, resolving systems through `data_dir`.
pub fn run_plan(plan: &ExperimentPlan, data_dir: Option<&Path>) -> Result<PlanOutcome> {
    plan.validate()?;
    let loaded: Vec<(String, std::result::Result<SystemVariantSet, String>)> = plan
        .systems
        .par_iter()
        .map(|s| {
            (
                s.id.clone(),
                s.load(data_dir, &plan.playout).map_err(|e| e.to_string()),
            )
        })
        .collect();
    Ok(run_loaded(plan, &loaded))
}

/// Runs a plan on already loaded systems, ignoring `plan.systems`.
pub fn run_plan_on(
    plan: &ExperimentPlan,
    systems: &[(String, SystemVariantSet)],
) -> Result<PlanOutcome> {
    plan.validate()?;
    let loaded: Vec<_> = systems
        .iter()
        .map(|(id, vs)| (id.clone(), Ok(vs.clone())))
        .collect();
    Ok(run_loaded(plan, &loaded))
}

fn run_loaded(
    plan: &ExperimentPlan,
    systems: &[(String, std::result::Result<SystemVariantSet, String>)],
) -> PlanOutcome {
    let mut units = Vec::new();
    for (id, vs) in systems {
        for setup in plan.setups() {
            for &beta in &plan.beta_grid {
                for replicate in 0..plan.replicates {
                    units.push(Unit {
                        system: id,
                        vs: vs.as_ref().map_err(Clone::clone),
                        setup,
                        beta,
                        replicate,
                    });
                }
            }
        }
    }
    let generators_trained = units.len();
    let records: Vec<RunRecord> = units
        .par_iter()
        .flat_map_iter(|u| run_unit(plan, u))
        .collect();
    let system_digests = systems
        .iter()
        .map(|(id, vs)| {
            let d = vs
                .as_ref()
                .ok()
                .map(|v| content_digest(v.variants.to_text().as_bytes()));
            (id.clone(), d)
        })
        .collect();
    PlanOutcome {
        records,
        generators_trained,
        system_digests,
    }
}

fn run_unit(plan: &ExperimentPlan, u: &Unit<'_>) -> Vec<RunRecord> {
    let label = unit_label(u.system, u.setup);
    let r = u.replicate as u64;
    let split_seed = derive_seed(plan.base_seed, &format!("split/{label}"), r);
    let train_seed = derive_seed(plan.base_seed, &format!("train/{label}/{}", u.beta), r);
    let base_sample_seed = derive_seed(plan.base_seed, &format!("sample/{label}/{}", u.beta), r);
    let record = |k: usize, sample_seed: u64| RunRecord {
        system: u.system.to_string(),
        rq: Some(plan.rq),
        setup: u.setup.to_string(),
        beta: u.beta,
        k,
        mode: plan.mode,
        replicate: u.replicate,
        generator: match plan.generator {
            GeneratorSpec::Gan { .. } => "gan".into(),
            GeneratorSpec::Markov { .. } => "markov".into(),
        },
        seeds: RunSeeds {
            split: split_seed,
            train: train_seed,
            sample: sample_seed,
        },
        system_max_len: u.vs.as_ref().ok().and_then(|v| v.variants.max_len()),
        observed_digest: None,
        eval: None,
        error: None,
        wall_ms: 0,
    };
    let sample_seed = |k: usize| {
        if plan.independent_draws {
            derive_seed(base_sample_seed, "k", k as u64)
        } else {
            base_sample_seed
        }
    };
    let fail = |stage: &str, msg: String| -> Vec<RunRecord> {
        log::warn!(
            "{label} beta={} replicate={}: {stage} failed: {msg}",
            u.beta,
            u.replicate
        );
        plan.k_grid
            .iter()
            .map(|&k| RunRecord {
                error: Some(format!("{stage}: {msg}")),
                ..record(k, sample_seed(k))
            })
            .collect()
    };

    let vs = match &u.vs {
        Ok(vs) => *vs,
        Err(e) => return fail("playout", e.clone()),
    };
    let spec = SplitSpec {
        kind: u.setup.split_kind(),
        seed: split_seed,
        enforce_max_length: plan.enforce_max_length,
        leak_fraction: plan.leak_fraction,
    };
    let started = Instant::now();
    let parts = match split(vs, &spec, u.system) {
        Ok(p) => p,
        Err(e) => return fail("split", e.to_string()),
    };
    let observed_digest = content_digest(parts.observed.to_text().as_bytes());
    let trained = match &plan.generator {
        GeneratorSpec::Gan { config } => {
            let cfg = GeneratorConfig {
                beta: u.beta,
                seed: train_seed,
                ..config.clone()
            };
            TrainedGenerator::train_gan(&parts.observed, &cfg)
        }
        GeneratorSpec::Markov { order, smoothing } => {
            TrainedGenerator::train_markov(&parts.observed, *order, *smoothing)
        }
    };
    let gen = match trained {
        Ok(g) => g,
        Err(e) => return fail("train", e.to_string()),
    };
    let train_ms = started.elapsed().as_millis() as u64;

    plan.k_grid
        .iter()
        .map(|&k| {
            let t = Instant::now();
            let seed = sample_seed(k);
            let sampled = match plan.mode {
                SampleMode::Naive => naive_sample(&gen, k, seed),
                SampleMode::Mh => mh_sample(&gen, k, plan.burn_in, plan.thinning, seed),
            };
            let mut rec = RunRecord {
                observed_digest: Some(observed_digest.clone()),
                ..record(k, seed)
            };
            match sampled.and_then(|s| evaluate(&s, vs, &parts.heldout)) {
                Ok(e) => rec.eval = Some(e),
                Err(e) => rec.error = Some(format!("evaluate: {e}")),
            }
            if plan.record_timing {
                rec.wall_ms = train_ms + t.elapsed().as_millis() as u64;
            }
            rec
        })
        .collect()
}
