use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::stats::{ci90, ols_fit, Expansion};
use super::{ExperimentPlan, PlanOutcome, RunRecord, RunSeeds};
use crate::error::{Error, Result};

pub const RUNS_HEADER: [&str; 13] = [
    "system", "rq", "setup", "beta", "k", "mode", "seed", "unique", "tp", "tp_u", "score",
    "rejected", "wall_ms",
];

fn fmt6(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

/// One row per record. Failed grid points keep their row with empty metric
/// columns.
pub fn write_runs_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_runs(records, file).map_err(|e| match e {
        Error::Csv(c) if c.is_io_error() => Error::io(path, std::io::Error::other(c.to_string())),
        other => other,
    })
}

/// [`write_runs_csv`] into any writer.
pub fn write_runs<W: std::io::Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RUNS_HEADER)?;
    for r in records {
        let metrics = match &r.eval {
            Some(e) => [
                e.unique_count.to_string(),
                fmt6(e.tp),
                fmt6(e.tp_u),
                fmt6(e.score),
                e.rejected.to_string(),
            ],
            None => Default::default(),
        };
        let head = [
            r.system.clone(),
            r.rq.map(|q| q.to_string()).unwrap_or_default(),
            r.setup.clone(),
            r.beta.to_string(),
            r.k.to_string(),
            r.mode.to_string(),
            r.seeds.sample.to_string(),
        ];
        w.write_record(
            head.iter()
                .chain(metrics.iter())
                .chain(std::iter::once(&r.wall_ms.to_string())),
        )?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))
}

fn write_errors_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["system", "setup", "beta", "k", "replicate", "error"])?;
    for r in records {
        if let Some(err) = &r.error {
            w.write_record([
                r.system.clone(),
                r.setup.clone(),
                r.beta.to_string(),
                r.k.to_string(),
                r.replicate.to_string(),
                err.clone(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Scores grouped by (setup, β, k), across systems and replicates.
fn write_ci_csv(records: &[RunRecord], path: &Path) -> Result<()> {
    let mut order: Vec<(String, String, usize)> = Vec::new();
    let mut groups: BTreeMap<(String, String, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(e) = &r.eval {
            let key = (r.setup.clone(), r.beta.to_string(), r.k);
            if !groups.contains_key(&key) {
                order.push(key.clone());
            }
            groups.entry(key).or_default().push(e.score);
        }
    }
    let mut w = csv_writer(path)?;
    w.write_record(["setup", "beta", "k", "mean", "lo", "hi", "n"])?;
    for key in order {
        let scores = &groups[&key];
        match ci90(scores) {
            Ok(ci) => w.write_record([
                key.0.clone(),
                key.1.clone(),
                key.2.to_string(),
                fmt6(ci.mean),
                fmt6(ci.lo()),
                fmt6(ci.hi()),
                ci.n.to_string(),
            ])?,
            Err(e) => log::info!(
                "no interval for setup {} beta {} k {}: {e}",
                key.0,
                key.1,
                key.2
            ),
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn regression_json(records: &[RunRecord]) -> serde_json::Value {
    let names = ["k", "mu", "system_size"];
    let (x, y): (Vec<Vec<f64>>, Vec<f64>) = records
        .iter()
        .filter_map(|r| {
            let e = r.eval.as_ref()?;
            Some((
                vec![r.k as f64, r.system_max_len? as f64, e.sizes.system as f64],
                e.score,
            ))
        })
        .unzip();
    let fit = |e: Expansion| match ols_fit(&names, &x, &y, e) {
        Ok(f) => serde_json::to_value(f).expect("fit serializes"),
        Err(err) => serde_json::json!({ "error": err.to_string() }),
    };
    serde_json::json!({
        "n": y.len(),
        "features": names,
        "linear": fit(Expansion::Linear),
        "quadratic": fit(Expansion::Quadratic),
    })
}

fn file_stem(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// One curve per (system, β) with the metrics along the k grid.
fn write_curves(records: &[RunRecord], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut curves: Vec<((String, String), Vec<&RunRecord>)> = Vec::new();
    for r in records {
        let key = (r.system.clone(), r.beta.to_string());
        match curves.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => curves.push((key, vec![r])),
        }
    }
    let mut written = Vec::new();
    for ((system, beta), rs) in curves {
        let path = dir.join(format!(
            "{}_beta{}.csv",
            file_stem(&system),
            file_stem(&beta)
        ));
        let mut w = csv_writer(&path)?;
        w.write_record(["k", "replicate", "unique_count", "tp", "tp_u", "score"])?;
        for r in rs {
            if let Some(e) = &r.eval {
                w.write_record([
                    r.k.to_string(),
                    r.replicate.to_string(),
                    e.unique_count.to_string(),
                    fmt6(e.tp),
                    fmt6(e.tp_u),
                    fmt6(e.score),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, Serialize)]
struct ManifestRun<'a> {
    system: &'a str,
    setup: &'a str,
    beta: f64,
    k: usize,
    replicate: usize,
    seeds: &'a RunSeeds,
    observed_digest: &'a Option<String>,
}

/// Reproduction record of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub plan_digest: String,
    pub base_seed: u64,
    pub plan: &'a ExperimentPlan,
    pub system_digests: BTreeMap<&'a str, Option<&'a str>>,
    pub generators_trained: usize,
    runs: Vec<ManifestRun<'a>>,
}

impl<'a> RunManifest<'a> {
    pub fn new(plan: &'a ExperimentPlan, outcome: &'a PlanOutcome) -> Self {
        RunManifest {
            tool: "vf",
            version: env!("CARGO_PKG_VERSION"),
            plan_digest: plan.digest(),
            base_seed: plan.base_seed,
            plan,
            system_digests: outcome
                .system_digests
                .iter()
                .map(|(id, d)| (id.as_str(), d.as_deref()))
                .collect(),
            generators_trained: outcome.generators_trained,
            runs: outcome
                .records
                .iter()
                .map(|r| ManifestRun {
                    system: &r.system,
                    setup: &r.setup,
                    beta: r.beta,
                    k: r.k,
                    replicate: r.replicate,
                    seeds: &r.seeds,
                    observed_digest: &r.observed_digest,
                })
                .collect(),
        }
    }
}

/// Writes `sweep_manifest.json`, `runs.csv`, `errors.csv`, `ci.csv`,
/// `regression.json` and, for multi-`k` plans, `curves/`. Returns the paths
/// written.
pub fn report(
    plan: &ExperimentPlan,
    outcome: &PlanOutcome,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if outcome.records.is_empty() {
        return Err(Error::Experiment("no records to report".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let manifest = out_dir.join("sweep_manifest.json");
    let text = serde_json::to_string_pretty(&RunManifest::new(plan, outcome))?;
    std::fs::write(&manifest, text).map_err(|e| Error::io(&manifest, e))?;
    written.push(manifest);

    let runs = out_dir.join("runs.csv");
    write_runs_csv(&outcome.records, &runs)?;
    written.push(runs);

    let errors = out_dir.join("errors.csv");
    write_errors_csv(&outcome.records, &errors)?;
    written.push(errors);

    let ci = out_dir.join("ci.csv");
    write_ci_csv(&outcome.records, &ci)?;
    written.push(ci);

    let reg = out_dir.join("regression.json");
    let text = serde_json::to_string_pretty(&regression_json(&outcome.records))?;
    std::fs::write(&reg, text).map_err(|e| Error::io(&reg, e))?;
    written.push(reg);

    if plan.k_grid.len() > 1 {
        written.extend(write_curves(&outcome.records, &out_dir.join("curves"))?);
    }
    Ok(written)
}
