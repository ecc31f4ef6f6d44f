use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use vf_core::experiments::{report, run_plan, write_runs, write_runs_csv, RunSeeds};
use vf_core::petri::SystemVariantSet;
use vf_core::sampler::{mh_sample, naive_sample, ChainStats};
use vf_core::split::{split, SplitKind, SplitSpec, SplitSummary};
use vf_core::variant::{
    read_variant_frequencies, read_variants, write_variant_frequencies, write_variants,
};
use vf_core::{
    enumerate_variants, evaluate, read_net, ExperimentPlan, GeneratorConfig, PlanOutcome,
    PlayoutConfig, RunRecord, SampleMode, SampleSet, SplitResult, TrainedGenerator,
    UniqueVariantLog,
};

use crate::args::*;
use crate::manifest::Manifest;

fn require_out(out: Option<&Path>, what: &str) -> Result<PathBuf> {
    match out {
        Some(p) => Ok(p.to_path_buf()),
        None => bail!("--out is required and names {what}"),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "system".into())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

pub fn run_playout(net: &Path, opts: &PlayoutOpts) -> Result<SystemVariantSet> {
    let cfg = PlayoutConfig {
        max_variant_length: opts.max_length,
        max_states: opts.max_states,
        max_silent_chain: opts.max_silent_chain,
        completion: opts.completion.into(),
    };
    let vs = enumerate_variants(&read_net(net)?, &cfg)?;
    log::info!(
        "{}: {} variants over {} events",
        net.display(),
        vs.len(),
        vs.alphabet.len()
    );
    Ok(vs)
}

pub fn split_spec(opts: &SplitOpts, seed: u64) -> SplitSpec {
    let kind = match (opts.setup.ratio, opts.setup.bias) {
        (_, Some(setup)) => SplitKind::Bias { setup },
        (Some(ratio), None) => SplitKind::RandomRatio { ratio },
        (None, None) => unreachable!("clap requires one split setup"),
    };
    SplitSpec {
        kind,
        seed,
        enforce_max_length: !opts.no_enforce_max_length,
        leak_fraction: opts.leak_fraction,
    }
}

pub fn run_split(
    vs: &SystemVariantSet,
    system: &str,
    opts: &SplitOpts,
    seed: u64,
) -> Result<SplitResult> {
    let parts = split(vs, &split_spec(opts, seed), system)?;
    log::info!(
        "{system} {}: {} observed, {} held out",
        parts.spec.kind,
        parts.observed.len(),
        parts.heldout.len()
    );
    Ok(parts)
}

pub fn generator_config(opts: &TrainOpts, seed: Option<u64>) -> Result<GeneratorConfig> {
    let mut cfg = match &opts.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing generator config {}", p.display()))?
        }
        None if opts.small => GeneratorConfig::small(0),
        None => GeneratorConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    macro_rules! set {
        ($($f:ident),*) => { $( if let Some(v) = opts.$f { cfg.$f = v; } )* };
    }
    set!(
        beta,
        epochs,
        pretrain_epochs,
        embedding_dim,
        hidden_dim,
        learning_rate,
        adversarial_learning_rate,
        batch_size
    );
    Ok(cfg)
}

pub fn run_train(
    observed: &UniqueVariantLog,
    opts: &TrainOpts,
    seed: Option<u64>,
) -> Result<TrainedGenerator> {
    let gen = match opts.generator {
        GeneratorKind::Gan => {
            TrainedGenerator::train_gan(observed, &generator_config(opts, seed)?)?
        }
        GeneratorKind::Markov => {
            TrainedGenerator::train_markov(observed, opts.order, opts.smoothing)?
        }
    };
    log::info!(
        "trained {} generator on {} variants",
        gen.kind(),
        observed.len()
    );
    Ok(gen)
}

/// Sidecar of a sampled variant file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub mode: SampleMode,
    pub k: usize,
    pub seed: u64,
    pub generator: String,
    #[serde(default)]
    pub beta: Option<f64>,
    pub draws: u64,
    pub rejected: u64,
    pub rejection_rate: f64,
    pub unique: usize,
    #[serde(default)]
    pub chain: Option<ChainStats>,
}

pub fn run_sample(
    gen: &TrainedGenerator,
    opts: &SampleOpts,
    seed: u64,
) -> Result<(SampleSet, SampleMeta)> {
    let set = match opts.mode {
        SampleMode::Naive => naive_sample(gen, opts.k, seed)?,
        SampleMode::Mh => mh_sample(gen, opts.k, opts.burn_in, opts.thinning, seed)?,
    };
    let meta = SampleMeta {
        mode: set.mode,
        k: opts.k,
        seed,
        generator: gen.kind().into(),
        beta: match gen {
            TrainedGenerator::Gan(m) => Some(m.config().beta),
            TrainedGenerator::Markov(_) => None,
        },
        draws: set.draws,
        rejected: set.rejected,
        rejection_rate: set.rejection_rate(),
        unique: set.unique_count(),
        chain: set.chain.clone(),
    };
    log::info!(
        "{} draws, {} unique, {} rejected",
        set.draws,
        set.unique_count(),
        set.rejected
    );
    Ok((set, meta))
}

pub struct EvalLabels {
    pub system: String,
    pub setup: String,
    pub beta: f64,
}

pub fn run_eval(
    sampled: &SampleSet,
    meta: &SampleMeta,
    vs: &SystemVariantSet,
    heldout: &UniqueVariantLog,
    labels: EvalLabels,
) -> Result<RunRecord> {
    let eval = evaluate(sampled, vs, heldout)?;
    log::info!(
        "tp {:.6} tp_u {:.6} score {:.6}",
        eval.tp,
        eval.tp_u,
        eval.score
    );
    Ok(RunRecord {
        system: labels.system,
        rq: None,
        setup: labels.setup,
        beta: labels.beta,
        k: meta.k,
        mode: meta.mode,
        replicate: 0,
        generator: meta.generator.clone(),
        seeds: RunSeeds {
            split: meta.seed,
            train: meta.seed,
            sample: meta.seed,
        },
        system_max_len: vs.variants.max_len(),
        observed_digest: None,
        eval: Some(eval),
        error: None,
        wall_ms: 0,
    })
}

pub fn playout(cli: &Cli, args: &PlayoutArgs) -> Result<()> {
    let out = require_out(cli.out.as_deref(), "the variant file")?;
    let vs = run_playout(&args.net, &args.opts)?;
    let mut m = Manifest::new("playout", args, cli.seed)?;
    m.input(&args.net)?;
    m.output(&out);
    m.write(&Manifest::path_for(&out, false))?;
    write_variants(&out, &vs.variants)?;
    Ok(())
}

fn write_split(dir: &Path, parts: &SplitResult, m: &mut Manifest) -> Result<()> {
    let files = ["observed.txt", "heldout.txt", "split.json"].map(|f| dir.join(f));
    for f in &files {
        m.output(f);
    }
    m.write(&Manifest::path_for(dir, true))?;
    write_variants(&files[0], &parts.observed)?;
    write_variants(&files[1], &parts.heldout)?;
    write_json(&files[2], &parts.summary())
}

pub fn split_cmd(cli: &Cli, args: &SplitArgs) -> Result<()> {
    let dir = require_out(cli.out.as_deref(), "the output directory")?;
    let vs = SystemVariantSet::from_variants(read_variants(&args.variants)?);
    let system = args.system.clone().unwrap_or_else(|| stem(&args.variants));
    let parts = run_split(&vs, &system, &args.opts, cli.seed())?;
    create_dir(&dir)?;
    let mut m = Manifest::new("split", args, cli.seed)?;
    m.input(&args.variants)?;
    write_split(&dir, &parts, &mut m)
}

pub fn train(cli: &Cli, args: &TrainArgs) -> Result<()> {
    let out = require_out(cli.out.as_deref(), "the checkpoint file")?;
    let gen = run_train(&read_variants(&args.variants)?, &args.opts, cli.seed)?;
    let mut m = Manifest::new("train", args, cli.seed)?;
    m.input(&args.variants)?;
    if let Some(c) = &args.opts.config {
        m.input(c)?;
    }
    m.output(&out);
    m.write(&Manifest::path_for(&out, false))?;
    gen.save(&out)?;
    Ok(())
}

fn write_sample(out: &Path, set: &SampleSet, meta: &SampleMeta, m: &mut Manifest) -> Result<()> {
    let meta_path = sidecar(out);
    m.output(out);
    m.output(&meta_path);
    m.write(&Manifest::path_for(out, false))?;
    write_variant_frequencies(out, &set.frequency)?;
    write_json(&meta_path, meta)
}

pub fn sample(cli: &Cli, args: &SampleArgs) -> Result<()> {
    let out = require_out(cli.out.as_deref(), "the sampled variant file")?;
    let gen = TrainedGenerator::load(&args.model)?;
    let (set, meta) = run_sample(&gen, &args.opts, cli.seed())?;
    let mut m = Manifest::new("sample", args, cli.seed)?;
    m.input(&args.model)?;
    write_sample(&out, &set, &meta, &mut m)
}

fn read_sample(path: &Path) -> Result<(SampleSet, SampleMeta)> {
    let frequency = read_variant_frequencies(path)?;
    let meta_path = sidecar(path);
    let meta: SampleMeta = match std::fs::read_to_string(&meta_path) {
        Ok(text) => serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", meta_path.display()))?,
        Err(_) => {
            let draws = frequency.values().sum();
            SampleMeta {
                mode: SampleMode::Naive,
                k: draws as usize,
                seed: 0,
                generator: String::new(),
                beta: None,
                draws,
                rejected: 0,
                rejection_rate: 0.0,
                unique: frequency.len(),
                chain: None,
            }
        }
    };
    let set = SampleSet {
        mode: meta.mode,
        draws: meta.draws,
        rejected: meta.rejected,
        frequency,
        chain: meta.chain.clone(),
    };
    Ok((set, meta))
}

pub fn eval(cli: &Cli, args: &EvalArgs) -> Result<()> {
    let (set, meta) = read_sample(&args.sampled)?;
    let vs = SystemVariantSet::from_variants(read_variants(&args.system)?);
    let heldout = read_variants(&args.heldout)?;
    let summary: Option<SplitSummary> = match &args.split {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))?)
        }
        None => None,
    };
    let labels = EvalLabels {
        system: args
            .system_id
            .clone()
            .or_else(|| summary.as_ref().map(|s| s.system.clone()))
            .unwrap_or_else(|| stem(&args.system)),
        setup: args
            .setup
            .clone()
            .or_else(|| summary.as_ref().map(|s| s.spec.kind.to_string()))
            .unwrap_or_default(),
        beta: meta.beta.or(args.beta).unwrap_or(0.0),
    };
    let record = run_eval(&set, &meta, &vs, &heldout, labels)?;
    match &cli.out {
        Some(out) => {
            let mut m = Manifest::new("eval", args, cli.seed)?;
            for p in [&args.sampled, &args.system, &args.heldout]
                .into_iter()
                .chain(&args.split)
            {
                m.input(p)?;
            }
            m.output(out);
            m.write(&Manifest::path_for(out, false))?;
            write_runs_csv(std::slice::from_ref(&record), out)?;
        }
        None => write_runs(std::slice::from_ref(&record), std::io::stdout().lock())?,
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SweepRecords {
    plan: ExperimentPlan,
    outcome: PlanOutcome,
}

fn write_report(
    dir: &Path,
    plan: &ExperimentPlan,
    outcome: &PlanOutcome,
    m: &mut Manifest,
) -> Result<()> {
    m.write(&Manifest::path_for(dir, true))?;
    let written = report(plan, outcome, dir)?;
    for p in &written {
        m.output(p);
    }
    m.write(&Manifest::path_for(dir, true))?;
    let failed = outcome.records.iter().filter(|r| r.error.is_some()).count();
    log::info!(
        "{} rows ({failed} failed) written to {}",
        outcome.records.len(),
        dir.display()
    );
    Ok(())
}

pub fn sweep(cli: &Cli, args: &SweepArgs) -> Result<()> {
    let dir = require_out(cli.out.as_deref(), "the output directory")?;
    let mut plan = ExperimentPlan::read(&args.plan)?;
    if let Some(s) = cli.seed {
        plan.base_seed = s;
    }
    log::info!(
        "{} plan: {} generators, {} records",
        plan.rq,
        plan.generator_count(),
        plan.record_count()
    );
    let outcome = run_plan(&plan, args.data_dir.as_deref())?;
    create_dir(&dir)?;
    let mut m = Manifest::new("sweep", &plan, Some(plan.base_seed))?;
    m.input(&args.plan)?;
    let records = dir.join("records.json");
    m.output(&records);
    let doc = SweepRecords { plan, outcome };
    write_report(&dir, &doc.plan, &doc.outcome, &mut m)?;
    std::fs::write(&records, serde_json::to_string(&doc)?)
        .with_context(|| format!("writing {}", records.display()))
}

pub fn report_cmd(cli: &Cli, args: &ReportArgs) -> Result<()> {
    let dir = require_out(cli.out.as_deref(), "the output directory")?;
    let text = std::fs::read_to_string(&args.records)
        .with_context(|| format!("reading {}", args.records.display()))?;
    let doc: SweepRecords = serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", args.records.display()))?;
    create_dir(&dir)?;
    let mut m = Manifest::new("report", args, Some(doc.plan.base_seed))?;
    m.input(&args.records)?;
    write_report(&dir, &doc.plan, &doc.outcome, &mut m)
}

/// Every stage gets the same base seed, exactly as when the subcommands are
/// chained by hand with one `--seed`.
pub fn pipeline(cli: &Cli, args: &PipelineArgs) -> Result<()> {
    let dir = require_out(cli.out.as_deref(), "the output directory")?;
    let seed = cli.seed();
    let system = args.system.clone().unwrap_or_else(|| stem(&args.net));
    let vs = run_playout(&args.net, &args.playout).context("stage playout")?;
    let parts = run_split(&vs, &system, &args.split, seed).context("stage split")?;
    let gen = run_train(&parts.observed, &args.train, cli.seed).context("stage train")?;
    let (set, meta) = run_sample(&gen, &args.sample, seed).context("stage sample")?;
    let labels = EvalLabels {
        system,
        setup: parts.spec.kind.to_string(),
        beta: meta.beta.unwrap_or(0.0),
    };
    let record = run_eval(&set, &meta, &vs, &parts.heldout, labels).context("stage eval")?;

    create_dir(&dir)?;
    let mut m = Manifest::new("pipeline", args, cli.seed)?;
    m.input(&args.net)?;
    if let Some(c) = &args.train.config {
        m.input(c)?;
    }
    let files: BTreeMap<&str, PathBuf> = ["variants.txt", "model.json", "sampled.txt", "runs.csv"]
        .into_iter()
        .map(|f| (f, dir.join(f)))
        .collect();
    for f in files.values() {
        m.output(f);
    }
    for f in ["observed.txt", "heldout.txt", "split.json"] {
        m.output(&dir.join(f));
    }
    m.output(&sidecar(&files["sampled.txt"]));
    m.write(&Manifest::path_for(&dir, true))?;

    write_variants(&files["variants.txt"], &vs.variants)?;
    write_variants(dir.join("observed.txt"), &parts.observed)?;
    write_variants(dir.join("heldout.txt"), &parts.heldout)?;
    write_json(&dir.join("split.json"), &parts.summary())?;
    gen.save(&files["model.json"])?;
    write_variant_frequencies(&files["sampled.txt"], &set.frequency)?;
    write_json(&sidecar(&files["sampled.txt"]), &meta)?;
    write_runs_csv(std::slice::from_ref(&record), &files["runs.csv"])?;
    Ok(())
}
