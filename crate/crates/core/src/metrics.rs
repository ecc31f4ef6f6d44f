//! Recovery metrics of a sampled variant set against the system language.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::petri::SystemVariantSet;
use crate::sampler::SampleSet;
use crate::variant::UniqueVariantLog;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSizes {
    pub system: usize,
    pub heldout: usize,
    pub observed: usize,
    pub draws: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub tp: f64,
    pub tp_u: f64,
    pub unique_count: usize,
    pub score: f64,
    /// `|unique ∩ V_S|`.
    pub hits: usize,
    /// `|unique ∩ V_u|`.
    pub heldout_hits: usize,
    /// Sampled variants outside the system language.
    pub false_positives: usize,
    pub rejected: u64,
    pub sizes: EvalSizes,
}

/// `(tp + tp_u) / √2`.
pub fn score(tp: f64, tp_u: f64) -> Result<f64> {
    for (name, x) in [("tp", tp), ("tp_u", tp_u)] {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Metrics(format!("{name} = {x} is outside [0, 1]")));
        }
    }
    Ok((tp + tp_u) / SQRT_2)
}

pub fn evaluate(
    sampled: &SampleSet,
    system: &SystemVariantSet,
    heldout: &UniqueVariantLog,
) -> Result<EvalResult> {
    evaluate_unique(
        &sampled.unique(),
        sampled.draws,
        sampled.rejected,
        system,
        heldout,
    )
}

/// Evaluation on an already deduplicated sample.
pub fn evaluate_unique(
    unique: &UniqueVariantLog,
    draws: u64,
    rejected: u64,
    system: &SystemVariantSet,
    heldout: &UniqueVariantLog,
) -> Result<EvalResult> {
    let vs = &system.variants;
    if vs.is_empty() {
        return Err(Error::Metrics("system variant set is empty".into()));
    }
    if heldout.is_empty() {
        return Err(Error::Metrics("held-out set is empty".into()));
    }
    if !heldout.is_subset(vs) {
        return Err(Error::Metrics(
            "held-out set is not contained in the system variant set".into(),
        ));
    }
    let hits = unique.iter().filter(|v| vs.contains(v)).count();
    let heldout_hits = unique.iter().filter(|v| heldout.contains(v)).count();
    let tp = hits as f64 / vs.len() as f64;
    let tp_u = heldout_hits as f64 / heldout.len() as f64;
    Ok(EvalResult {
        tp,
        tp_u,
        unique_count: unique.len(),
        score: score(tp, tp_u)?,
        hits,
        heldout_hits,
        false_positives: unique.len() - hits,
        rejected,
        sizes: EvalSizes {
            system: vs.len(),
            heldout: heldout.len(),
            observed: vs.len() - heldout.len(),
            draws,
        },
    })
}
