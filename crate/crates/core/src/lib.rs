//! Hybrid genetic-algorithm / backpropagation training for a three-layer
//! feedforward early-warning network.
//!
//! The crate is organised bottom-up:
//!
//! - [`dataset`]: indicator schema, CSV ingestion, min-max normalisation and
//!   the five-level warning classification.
//! - [`network`]: the `n-q-m` tansig/linear network, its SSE loss, analytic
//!   gradients and the gradient-descent and Levenberg-Marquardt trainers.
//! - [`genome`]: the real-coded chromosome layout of a network.
//! - [`evolution`]: roulette selection, arithmetic crossover, non-uniform
//!   mutation and the elitist generational loop.
//! - [`pipeline`]: GA-BP and plain BP runs, synthetic data and comparison
//!   reports.
//! - [`model`]: the persisted model document.
//!
//! All randomness is derived from a single `u64` seed through the named
//! substreams in [`rng`].

pub mod dataset;
pub mod error;
pub mod evolution;
pub mod genome;
pub mod model;
pub mod network;
pub mod pipeline;
pub mod report;
pub mod rng;

pub use dataset::{
    classify_warning, IndicatorSchema, NormStats, Orientation, Sample, WarningLevel,
};
pub use error::{Error, Result};
pub use evolution::{evolve, EvolutionOutcome, EvolutionTrace, GaConfig, GeneBounds};
pub use genome::{chromosome_length, decode, encode, Chromosome};
pub use model::ModelFile;
pub use network::{
    hidden_layer_size, ErrorCurve, Evaluation, NetworkParams, NetworkShape, StopReason,
    TrainConfig, TrainMethod, TrainOutcome,
};
pub use pipeline::{
    compare, run_bp, run_gabp, synth_dataset, ComparisonReport, RunReport, Split, SynthData,
    SynthOptions, Variant,
};

/// Version string embedded into persisted models and reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
