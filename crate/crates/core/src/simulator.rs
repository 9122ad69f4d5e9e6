//! Synthetic corpora, two correlated rankers and position-based clicks.
//!
//! Randomness is split by purpose. The corpus and the rankers each draw from
//! their own stream of the base seed, and every click record gets a stream
//! derived from (seed, ranker, query, repetition), so changing the number of
//! sweeps leaves the corpus, the rankers and the earlier sweeps untouched.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::corpus::{same_catalog, ClickLogRecord, Corpus, LogCollection, QueryRecord, RankingTable};
use crate::error::{Error, Result};

/// How queries are assigned to log records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SamplingMode {
    /// Each sweep logs every query once per ranker.
    #[default]
    Sweep,
    /// Each record's query is drawn uniformly, independently of the ranker.
    IidSampling,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SimulationConfig {
    /// Position-bias severity: `p_r = (1/r)^eta`.
    pub eta: f64,
    /// Click probability multiplier for irrelevant documents.
    pub eps_minus: f64,
    /// Correlation of the two rankers' score noise, in [0, 1].
    pub overlap: f64,
    pub sweeps: usize,
    pub top_k: usize,
    pub num_queries: usize,
    pub candidates_per_query: usize,
    pub relevant_fraction: f64,
    /// Scale of ranker score noise relative to the unit relevance gap.
    pub score_noise: f64,
    pub seed: u64,
    pub mode: SamplingMode,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            eta: 1.0,
            eps_minus: 0.1,
            overlap: 0.8,
            sweeps: 5,
            top_k: 10,
            num_queries: 1000,
            candidates_per_query: 20,
            relevant_fraction: 0.25,
            score_noise: 2.0,
            seed: 0,
            mode: SamplingMode::Sweep,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be a finite non-negative number");
        }
        if !(0.0..=1.0).contains(&self.eps_minus) {
            return bad("eps_minus must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.overlap) {
            return bad("overlap must lie in [0, 1]");
        }
        if self.sweeps == 0 {
            return bad("sweeps must be positive");
        }
        if self.top_k < 2 {
            return bad("top_k must be at least 2");
        }
        if self.num_queries == 0 {
            return bad("num_queries must be positive");
        }
        if self.candidates_per_query < 2 {
            return bad("candidates_per_query must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.relevant_fraction) {
            return bad("relevant_fraction must lie in [0, 1]");
        }
        if !(self.score_noise >= 0.0 && self.score_noise.is_finite()) {
            return bad("score_noise must be a finite non-negative number");
        }
        Ok(())
    }
}

const STREAM_CORPUS: u64 = 1;
const STREAM_RANKERS: u64 = 2;
const STREAM_CLICKS: u64 = 3;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Deterministic seed derivation from a base seed and a path of tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedStream(u64);

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream(splitmix64(seed))
    }

    pub fn child(self, tag: u64) -> Self {
        SeedStream(splitmix64(self.0 ^ splitmix64(tag)))
    }

    pub fn seed(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn corpus(seed: u64) -> ChaCha8Rng {
        Self::new(seed).child(STREAM_CORPUS).rng()
    }

    pub fn rankers(seed: u64) -> ChaCha8Rng {
        Self::new(seed).child(STREAM_RANKERS).rng()
    }
}

/// Queries `q0000…` with `d00…` candidates, each relevant independently with
/// probability `relevant_fraction`.
pub fn generate_corpus<R: Rng + ?Sized>(config: &SimulationConfig, rng: &mut R) -> Result<Corpus> {
    config.validate()?;
    let qw = digits(config.num_queries);
    let dw = digits(config.candidates_per_query);
    let queries = (0..config.num_queries)
        .map(|q| {
            let candidates = (0..config.candidates_per_query)
                .map(|d| format!("d{d:0dw$}"))
                .collect();
            let relevance = (0..config.candidates_per_query)
                .map(|_| rng.random_bool(config.relevant_fraction))
                .collect();
            QueryRecord {
                query_id: format!("q{q:0qw$}"),
                candidates,
                relevance,
            }
        })
        .collect();
    Corpus::new(queries)
}

fn digits(n: usize) -> usize {
    let mut width = 1;
    let mut x = n.saturating_sub(1);
    while x >= 10 {
        x /= 10;
        width += 1;
    }
    width
}

/// Two rankers `A` and `B` scoring `rel + σ(√o·z_shared + √(1−o)·z_own)` and
/// sorting by descending score, ties by document id.
///
/// The three normal draws per document happen in a fixed order whatever the
/// overlap, so different overlaps on the same stream share their noise.
pub fn generate_rankers<R: Rng + ?Sized>(
    corpus: &Corpus,
    overlap: f64,
    score_noise: f64,
    rng: &mut R,
) -> Result<RankingTable> {
    if !(0.0..=1.0).contains(&overlap) {
        return Err(Error::InvalidArgument("overlap must lie in [0, 1]".into()));
    }
    if !(score_noise >= 0.0 && score_noise.is_finite()) {
        return Err(Error::InvalidArgument(
            "score noise must be finite and non-negative".into(),
        ));
    }
    let shared_scale = score_noise * libm::sqrt(overlap);
    let own_scale = score_noise * libm::sqrt(1.0 - overlap);
    let mut table = RankingTable::new(corpus.catalog());
    let a = table.ranker_index("A");
    let b = table.ranker_index("B");
    let mut scores_a = Vec::new();
    let mut scores_b = Vec::new();
    for (qi, q) in corpus.queries().iter().enumerate() {
        scores_a.clear();
        scores_b.clear();
        for &rel in &q.relevance {
            let base = if rel { 1.0 } else { 0.0 };
            let zs: f64 = rng.sample(StandardNormal);
            let za: f64 = rng.sample(StandardNormal);
            let zb: f64 = rng.sample(StandardNormal);
            scores_a.push(base + shared_scale * zs + own_scale * za);
            scores_b.push(base + shared_scale * zs + own_scale * zb);
        }
        for (ranker, scores) in [(a, &scores_a), (b, &scores_b)] {
            let mut order: Vec<usize> = (0..q.candidates.len()).collect();
            order.sort_by(|&x, &y| {
                scores[y]
                    .partial_cmp(&scores[x])
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| q.candidates[x].cmp(&q.candidates[y]))
            });
            table.insert(ranker, qi, order)?;
        }
    }
    Ok(table)
}

/// `((1/1)^eta, …, (1/M)^eta)`.
pub fn true_propensities(eta: f64, cutoff: usize) -> Vec<f64> {
    (1..=cutoff)
        .map(|r| libm::pow(r as f64, -eta))
        .collect()
}

/// Position-based clicks: a document shown at rank r is clicked with
/// probability `p_r` if relevant and `p_r · eps_minus` otherwise.
///
/// Records are emitted ranker by ranker. In sweep mode each sweep visits the
/// queries in corpus order; in i.i.d. mode each record draws its query
/// uniformly.
pub fn simulate_clicks(
    rankings: &RankingTable,
    corpus: &Corpus,
    config: &SimulationConfig,
) -> Result<LogCollection> {
    config.validate()?;
    let catalog = corpus.catalog();
    if !same_catalog(rankings.catalog(), &catalog) {
        return Err(Error::CatalogMismatch);
    }
    let max_len = corpus
        .queries()
        .iter()
        .map(|q| q.candidates.len())
        .max()
        .unwrap_or(0);
    let propensities = true_propensities(config.eta, max_len);
    let clicks_stream = SeedStream::new(config.seed).child(STREAM_CLICKS);
    let mut logs = LogCollection::new(rankings.catalog().clone());
    let per_ranker = config.sweeps * corpus.len();

    for (ri, name) in rankings.rankers().iter().enumerate() {
        let ranker = logs.ranker_index(name);
        let ranker_stream = clicks_stream.child(ri as u64);
        for j in 0..per_ranker {
            let (query, mut rng) = match config.mode {
                SamplingMode::Sweep => {
                    let (rep, q) = (j / corpus.len(), j % corpus.len());
                    (q, ranker_stream.child(q as u64).child(rep as u64).rng())
                }
                SamplingMode::IidSampling => {
                    let mut rng = ranker_stream.child(u64::MAX).child(j as u64).rng();
                    (rng.random_range(0..corpus.len()), rng)
                }
            };
            let ranking = rankings
                .get(ri, query)
                .ok_or_else(|| Error::MissingRanking {
                    ranker_id: name.clone(),
                    query_id: corpus.queries()[query].query_id.clone(),
                })?
                .to_vec();
            let relevance = &corpus.queries()[query].relevance;
            let clicks = ranking
                .iter()
                .enumerate()
                .map(|(pos, &doc)| {
                    let p = propensities[pos];
                    let prob = if relevance[doc] { p } else { p * config.eps_minus };
                    rng.random::<f64>() < prob
                })
                .collect();
            logs.push(ClickLogRecord {
                ranker,
                query,
                ranking,
                clicks,
            })?;
        }
    }
    Ok(logs)
}
