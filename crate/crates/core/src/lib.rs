//! Relative position-bias propensities from click logs of several rankers.
//!
//! When more than one deterministic ranker has been serving the same query
//! distribution, the same (query, document) pair ends up at different
//! positions purely because of which ranker happened to be used. Those pairs
//! are natural interventions: restricting click statistics to them controls
//! for relevance, so what is left is the examination propensity of each
//! position under the position-based click model (PBM).
//!
//! The crate is organised bottom-up:
//!
//! - [`corpus`]: queries, candidate sets, ranker outputs and click logs.
//! - [`interventions`]: interventional sets, the log-size weighting and the
//!   weighted click / no-click statistics per position pair.
//! - [`estimators`]: the pairwise click-ratio estimator and the maximum
//!   likelihood fit of relative propensities, plus identifiability checks.
//! - [`simulator`]: synthetic corpora, correlated rankers and PBM clicks.
//! - [`pipeline`]: glue running logs → statistics → estimate.
//!
//! Everything here is pure computation over in-memory values and builds with
//! `no_std` + `alloc`. File formats, the experiment harness and the CLI live
//! in the `posbias` crate.

#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;

pub mod corpus;
pub mod error;
pub mod estimators;
pub mod interventions;
pub mod pipeline;
pub mod simulator;
mod sum;

pub use corpus::{
    derive_rankings, Catalog, ClickLogRecord, Corpus, LogCollection, QueryCandidates, QueryRecord,
    RankingTable,
};
pub use error::{Error, Result};
pub use estimators::{
    check_identifiability, fit_mle, fit_mle_observed, mle_gradient, mle_objective,
    pairwise_estimate, pairwise_ratio, AscentStep, FitOptions, IdentifiabilityReport, MleParams,
    PairwiseEstimate,
    PropensityEstimate, StepRule,
};
pub use interventions::{
    accumulate_pair_stats, build_interventional_sets, compute_weights, InterventionalSets,
    PairSide, PairStat, PairStats, WeightTable,
};
pub use simulator::{
    generate_corpus, generate_rankers, simulate_clicks, true_propensities, SamplingMode,
    SeedStream, SimulationConfig,
};
