//! Interventional sets, the log-size weighting function and the weighted
//! click statistics per position pair.
//!
//! A (query, document) pair belongs to the set of positions {k, k'} when one
//! ranker puts the document at k and another at k'. Its clicks at k are
//! weighted by `1 / w(q, d, k)`, where `w(q, d, k) = Σ_i n_i · 1[rank_i = k]`
//! is the number of logged impressions that could have shown it there. This
//! undoes the imbalance between rankers with different log sizes.
//!
//! Positions are 1-based throughout. Positions beyond the cutoff are ignored.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::corpus::{same_catalog, Catalog, LogCollection, RankingTable};
use crate::error::{Error, Result};
use crate::sum::CompensatedSum;

/// Normalised key of an unordered position pair.
pub(crate) fn pair_key(k: usize, k_prime: usize) -> (usize, usize) {
    if k <= k_prime {
        (k, k_prime)
    } else {
        (k_prime, k)
    }
}

fn all_pairs(cutoff: usize) -> impl Iterator<Item = (usize, usize)> {
    (1..=cutoff).flat_map(move |k| (k + 1..=cutoff).map(move |kp| (k, kp)))
}

/// For every unordered position pair {k, k'} within the cutoff, the
/// (query index, document index) pairs that some ranker shows at k and
/// another at k'.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionalSets {
    cutoff: usize,
    catalog: Catalog,
    sets: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>>,
    /// Distinct positions within the cutoff at which any ranker shows (q, d).
    placements: BTreeMap<(usize, usize), Vec<usize>>,
}

impl InterventionalSets {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    /// The set for {k, k'}; either orientation works. Empty for pairs outside
    /// the cutoff.
    pub fn get(&self, k: usize, k_prime: usize) -> Option<&BTreeSet<(usize, usize)>> {
        self.sets.get(&pair_key(k, k_prime))
    }

    pub fn contains(&self, k: usize, k_prime: usize, query: usize, doc: usize) -> bool {
        self.get(k, k_prime)
            .is_some_and(|s| s.contains(&(query, doc)))
    }

    /// All pairs in (k, k') order with k < k', empty ones included.
    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), &BTreeSet<(usize, usize)>)> + '_ {
        self.sets.iter().map(|(&k, v)| (k, v))
    }

    /// Positions at which (query, doc) is shown by some ranker, ascending.
    pub fn positions_of(&self, query: usize, doc: usize) -> &[usize] {
        self.placements
            .get(&(query, doc))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Set members as (query id, document id).
    pub fn members_by_id(&self, k: usize, k_prime: usize) -> Vec<(&str, &str)> {
        self.get(k, k_prime)
            .map(|s| {
                s.iter()
                    .map(|&(q, d)| {
                        let qc = self.catalog.query(q);
                        (qc.query_id.as_str(), qc.candidates[d].as_str())
                    })
                    .collect()
            })
            .unwrap_or_default()
    }
}

pub fn build_interventional_sets(
    rankings: &RankingTable,
    cutoff: usize,
) -> Result<InterventionalSets> {
    if cutoff < 2 {
        return Err(Error::InvalidArgument(format!(
            "cutoff must be at least 2, got {cutoff}"
        )));
    }
    if rankings.is_empty() {
        return Err(Error::InvalidArgument("ranking table is empty".into()));
    }
    let mut placements: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for ((_, query), ranking) in rankings.entries() {
        for (i, &doc) in ranking.iter().enumerate().take(cutoff) {
            let positions = placements.entry((query, doc)).or_default();
            if let Err(at) = positions.binary_search(&(i + 1)) {
                positions.insert(at, i + 1);
            }
        }
    }
    let mut sets: BTreeMap<(usize, usize), BTreeSet<(usize, usize)>> =
        all_pairs(cutoff).map(|p| (p, BTreeSet::new())).collect();
    for (&qd, positions) in &placements {
        for (a, &k) in positions.iter().enumerate() {
            for &kp in &positions[a + 1..] {
                sets.get_mut(&(k, kp)).expect("pair within cutoff").insert(qd);
            }
        }
    }
    Ok(InterventionalSets {
        cutoff,
        catalog: rankings.catalog().clone(),
        sets,
        placements,
    })
}

/// `w(q, d, k)`: summed log sizes of the rankers that show d at k for q.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    cutoff: usize,
    catalog: Catalog,
    weights: BTreeMap<(usize, usize, usize), u64>,
}

impl WeightTable {
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Weight of (query, doc, position); zero when no ranker shows it there.
    pub fn weight(&self, query: usize, doc: usize, position: usize) -> u64 {
        self.weights
            .get(&(query, doc, position))
            .copied()
            .unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize, usize), u64)> + '_ {
        self.weights.iter().map(|(&k, &v)| (k, v))
    }
}

pub fn compute_weights(
    rankings: &RankingTable,
    log_sizes: &BTreeMap<String, usize>,
    cutoff: usize,
) -> Result<WeightTable> {
    if cutoff < 1 {
        return Err(Error::InvalidArgument("cutoff must be positive".into()));
    }
    for ranker_id in log_sizes.keys() {
        if rankings.find_ranker(ranker_id).is_none() {
            return Err(Error::UnknownRanker {
                ranker_id: ranker_id.clone(),
            });
        }
    }
    let sizes = rankings
        .rankers()
        .iter()
        .map(|r| {
            log_sizes
                .get(r)
                .map(|&n| n as u64)
                .ok_or_else(|| Error::MissingLogSize {
                    ranker_id: r.clone(),
                })
        })
        .collect::<Result<Vec<u64>>>()?;

    let mut weights = BTreeMap::new();
    for ((ranker, query), ranking) in rankings.entries() {
        for (i, &doc) in ranking.iter().enumerate().take(cutoff) {
            *weights.entry((query, doc, i + 1)).or_insert(0) += sizes[ranker];
        }
    }
    Ok(WeightTable {
        cutoff,
        catalog: rankings.catalog().clone(),
        weights,
    })
}

/// Weighted statistics at one position of a pair.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PairSide {
    /// Σ δ / w over impressions of set members at this position.
    pub clicks: f64,
    /// Σ (1 − δ) / w over the same impressions.
    pub no_clicks: f64,
    /// Raw impression count behind the two sums.
    pub impressions: u64,
}

impl PairSide {
    pub fn new(clicks: f64, no_clicks: f64) -> Self {
        PairSide {
            clicks,
            no_clicks,
            impressions: 0,
        }
    }

    /// Weighted impression mass, `clicks + no_clicks`.
    pub fn mass(&self) -> f64 {
        self.clicks + self.no_clicks
    }

    fn check(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if ok(self.clicks) && ok(self.no_clicks) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "pair statistics must be finite and non-negative, got ({}, {})",
                self.clicks, self.no_clicks
            )))
        }
    }
}

/// Statistics of one unordered pair, stored with `k < k_prime`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStat {
    pub k: usize,
    pub k_prime: usize,
    pub at_k: PairSide,
    pub at_k_prime: PairSide,
}

impl PairStat {
    pub fn mass(&self) -> f64 {
        self.at_k.mass() + self.at_k_prime.mass()
    }
}

/// Weighted click and no-click sums for every position pair in the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats {
    cutoff: usize,
    pairs: BTreeMap<(usize, usize), PairStat>,
}

impl PairStats {
    /// All pairs present with zero statistics.
    pub fn new(cutoff: usize) -> Self {
        let pairs = all_pairs(cutoff)
            .map(|(k, kp)| {
                (
                    (k, kp),
                    PairStat {
                        k,
                        k_prime: kp,
                        at_k: PairSide::default(),
                        at_k_prime: PairSide::default(),
                    },
                )
            })
            .collect();
        PairStats { cutoff, pairs }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Sets the statistics of {k, k'}: `at_k` belongs to position `k`.
    pub fn set(&mut self, k: usize, k_prime: usize, at_k: PairSide, at_k_prime: PairSide) -> Result<()> {
        if k == k_prime || k == 0 || k_prime == 0 || k.max(k_prime) > self.cutoff {
            return Err(Error::InvalidArgument(format!(
                "pair {{{k},{k_prime}}} outside cutoff {}",
                self.cutoff
            )));
        }
        at_k.check()?;
        at_k_prime.check()?;
        let (lo, hi) = pair_key(k, k_prime);
        let (at_lo, at_hi) = if k < k_prime {
            (at_k, at_k_prime)
        } else {
            (at_k_prime, at_k)
        };
        self.pairs.insert(
            (lo, hi),
            PairStat {
                k: lo,
                k_prime: hi,
                at_k: at_lo,
                at_k_prime: at_hi,
            },
        );
        Ok(())
    }

    /// Statistics at (k, k') in the requested orientation.
    pub fn get(&self, k: usize, k_prime: usize) -> Option<(PairSide, PairSide)> {
        self.pairs.get(&pair_key(k, k_prime)).map(|p| {
            if k < k_prime {
                (p.at_k, p.at_k_prime)
            } else {
                (p.at_k_prime, p.at_k)
            }
        })
    }

    /// All pairs in key order.
    pub fn iter(&self) -> impl Iterator<Item = &PairStat> + '_ {
        self.pairs.values()
    }

    /// Copy keeping only pair {k, k'}; all other pairs zeroed.
    pub fn restricted_to(&self, k: usize, k_prime: usize) -> PairStats {
        let mut out = PairStats::new(self.cutoff);
        if let Some(p) = self.pairs.get(&pair_key(k, k_prime)) {
            out.pairs.insert((p.k, p.k_prime), *p);
        }
        out
    }
}

/// Accumulates the weighted click / no-click sums.
///
/// Clicks and impressions are first tallied as integers per (query, doc,
/// position) in record order, then each set member contributes
/// `clicks / w` and `(impressions − clicks) / w`, summed with compensation in
/// (pair, query, doc) order. The result does not depend on record order or on
/// how the records are chunked.
pub fn accumulate_pair_stats(
    logs: &LogCollection,
    sets: &InterventionalSets,
    weights: &WeightTable,
) -> Result<PairStats> {
    if sets.cutoff != weights.cutoff {
        return Err(Error::InvalidArgument(format!(
            "cutoff mismatch: sets {} vs weights {}",
            sets.cutoff, weights.cutoff
        )));
    }
    if !same_catalog(logs.catalog(), &sets.catalog) || !same_catalog(&sets.catalog, &weights.catalog)
    {
        return Err(Error::CatalogMismatch);
    }
    let cutoff = sets.cutoff;

    // (query, doc, position) -> (clicks, impressions)
    let mut tally: BTreeMap<(usize, usize, usize), (u64, u64)> = BTreeMap::new();
    for rec in logs.records() {
        for (i, (&doc, &clicked)) in rec.ranking.iter().zip(&rec.clicks).enumerate().take(cutoff) {
            if sets.positions_of(rec.query, doc).len() < 2 {
                continue;
            }
            let cell = tally.entry((rec.query, doc, i + 1)).or_insert((0, 0));
            cell.0 += u64::from(clicked);
            cell.1 += 1;
        }
    }

    let mut stats = PairStats::new(cutoff);
    for (&(k, kp), members) in &sets.sets {
        let mut sides = [
            (k, CompensatedSum::default(), CompensatedSum::default(), 0u64),
            (kp, CompensatedSum::default(), CompensatedSum::default(), 0u64),
        ];
        for &(q, d) in members {
            for (pos, c, nc, imps) in sides.iter_mut() {
                let Some(&(clicks, shown)) = tally.get(&(q, d, *pos)) else {
                    continue;
                };
                let w = weights.weight(q, d, *pos);
                if w == 0 {
                    // Impressions at a position no weighted ranker uses cannot
                    // come from a consistent ranking table.
                    return Err(Error::InvalidArgument(format!(
                        "record shows a document at position {pos} with zero weight"
                    )));
                }
                let w = w as f64;
                c.add(clicks as f64 / w);
                nc.add((shown - clicks) as f64 / w);
                *imps += shown;
            }
        }
        let side = |s: &(usize, CompensatedSum, CompensatedSum, u64)| PairSide {
            clicks: s.1.value(),
            no_clicks: s.2.value(),
            impressions: s.3,
        };
        stats.pairs.insert(
            (k, kp),
            PairStat {
                k,
                k_prime: kp,
                at_k: side(&sides[0]),
                at_k_prime: side(&sides[1]),
            },
        );
    }
    Ok(stats)
}
