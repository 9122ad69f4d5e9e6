//! Logs → interventional statistics → estimate, and a one-call simulation.

use crate::corpus::{derive_rankings, Corpus, LogCollection, RankingTable};
use crate::error::Result;
use crate::estimators::{fit_mle, FitOptions, PropensityEstimate};
use crate::interventions::{
    accumulate_pair_stats, build_interventional_sets, compute_weights, PairStats,
};
use crate::simulator::{
    generate_corpus, generate_rankers, simulate_clicks, SeedStream, SimulationConfig,
};

/// A simulated corpus, its two rankers and their click logs.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub corpus: Corpus,
    pub rankings: RankingTable,
    pub logs: LogCollection,
}

pub fn simulate(config: &SimulationConfig) -> Result<Simulation> {
    config.validate()?;
    let corpus = generate_corpus(config, &mut SeedStream::corpus(config.seed))?;
    let rankings = generate_rankers(
        &corpus,
        config.overlap,
        config.score_noise,
        &mut SeedStream::rankers(config.seed),
    )?;
    let logs = simulate_clicks(&rankings, &corpus, config)?;
    Ok(Simulation {
        corpus,
        rankings,
        logs,
    })
}

/// Pair statistics using the given ranking table.
pub fn pair_stats_with_rankings(
    logs: &LogCollection,
    rankings: &RankingTable,
    cutoff: usize,
) -> Result<PairStats> {
    let sets = build_interventional_sets(rankings, cutoff)?;
    let weights = compute_weights(rankings, &logs.log_sizes(), cutoff)?;
    accumulate_pair_stats(logs, &sets, &weights)
}

/// Pair statistics with rankings recovered from the logs themselves.
pub fn pair_stats(logs: &LogCollection, cutoff: usize) -> Result<PairStats> {
    let rankings = derive_rankings(logs)?;
    pair_stats_with_rankings(logs, &rankings, cutoff)
}

pub fn estimate(
    logs: &LogCollection,
    cutoff: usize,
    options: &FitOptions,
) -> Result<PropensityEstimate> {
    fit_mle(&pair_stats(logs, cutoff)?, options)
}
