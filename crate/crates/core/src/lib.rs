//! Core algorithms of the variant fidelity workbench.
//!
//! The pipeline enumerates the variant language of a ground-truth Petri net,
//! splits it into an observed log and a held-out set, trains a sequence
//! generator on the observed log, samples from it and scores how much of the
//! system language the samples recover.

pub mod error;
pub mod experiments;
pub mod generator;
pub mod metrics;
pub mod nn;
pub mod petri;
pub mod sampler;
pub mod seed;
pub mod split;
pub mod variant;

pub use error::{Error, Result};
pub use experiments::{ExperimentPlan, PlanOutcome, RunRecord};
pub use generator::{GeneratorConfig, TrainedGenerator};
pub use metrics::{evaluate, score, EvalResult};
pub use petri::{enumerate_variants, read_net, PetriNet, PlayoutConfig, SystemVariantSet};
pub use sampler::{mh_sample, naive_sample, SampleMode, SampleSet};
pub use split::{split, SplitResult, SplitSpec};
pub use variant::{TokenCodec, UniqueVariantLog, Variant};
