#![allow(dead_code)]

use posbias_core::{Catalog, LogCollection, PairSide, PairStats};
use proptest::prelude::*;

/// A small log: rankers with fixed per-query permutations and records drawn
/// from them.
#[derive(Debug, Clone)]
pub struct SmallLog {
    pub num_queries: usize,
    pub num_candidates: usize,
    /// `rankings[ranker][query]` is a permutation of candidate indices.
    pub rankings: Vec<Vec<Vec<usize>>>,
    /// (ranker, query, clicks by displayed position).
    pub records: Vec<(usize, usize, Vec<bool>)>,
}

pub fn query_id(q: usize) -> String {
    format!("q{q}")
}

pub fn doc_id(d: usize) -> String {
    format!("d{d}")
}

impl SmallLog {
    pub fn catalog(&self) -> Catalog {
        Catalog::new(
            (0..self.num_queries)
                .map(|q| (query_id(q), (0..self.num_candidates).map(doc_id).collect()))
                .collect(),
        )
        .unwrap()
    }

    /// Builds the collection with ranker `i` named `names[i]`.
    pub fn collection_named(&self, names: &[String]) -> LogCollection {
        let mut logs = LogCollection::new(self.catalog());
        for (ranker, query, clicks) in &self.records {
            let ranking: Vec<String> = self.rankings[*ranker][*query]
                .iter()
                .map(|&d| doc_id(d))
                .collect();
            logs.push_ids(&names[*ranker], &query_id(*query), &ranking, clicks.clone())
                .unwrap();
        }
        logs
    }

    pub fn collection(&self) -> LogCollection {
        let names: Vec<String> = (0..self.rankings.len()).map(|i| format!("r{i}")).collect();
        self.collection_named(&names)
    }
}

pub fn arb_small_log(max_records: usize) -> impl Strategy<Value = SmallLog> {
    (1usize..=3, 2usize..=5, 1usize..=3).prop_flat_map(move |(nq, nc, nr)| {
        let perm = Just((0..nc).collect::<Vec<usize>>()).prop_shuffle();
        let rankings = prop::collection::vec(prop::collection::vec(perm, nq), nr);
        let records = prop::collection::vec(
            (0..nr, 0..nq, prop::collection::vec(any::<bool>(), nc)),
            1..=max_records,
        );
        (rankings, records).prop_map(move |(rankings, records)| SmallLog {
            num_queries: nq,
            num_candidates: nc,
            rankings,
            records,
        })
    })
}

/// Random statistics: each pair present with probability ~0.7, sums in [0, 3].
pub fn arb_pair_stats(cutoff: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = PairStats> {
    cutoff.prop_flat_map(|m| {
        let n_pairs = m * (m - 1) / 2;
        prop::collection::vec(
            (prop::bool::weighted(0.7), 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64, 0.0..3.0f64),
            n_pairs,
        )
        .prop_map(move |entries| {
            let mut stats = PairStats::new(m);
            let pairs = (1..=m).flat_map(|k| (k + 1..=m).map(move |kp| (k, kp)));
            for ((k, kp), (on, a, b, c, d)) in pairs.zip(entries) {
                if on {
                    stats
                        .set(k, kp, PairSide::new(a, b), PairSide::new(c, d))
                        .unwrap();
                }
            }
            stats
        })
    })
}

pub fn assert_stats_close(a: &PairStats, b: &PairStats, tol: f64) {
    assert_eq!(a.cutoff(), b.cutoff());
    for (x, y) in a.iter().zip(b.iter()) {
        assert_eq!((x.k, x.k_prime), (y.k, y.k_prime));
        for (s, t) in [(x.at_k, y.at_k), (x.at_k_prime, y.at_k_prime)] {
            assert!(
                (s.clicks - t.clicks).abs() <= tol && (s.no_clicks - t.no_clicks).abs() <= tol,
                "pair ({},{}): {s:?} vs {t:?}",
                x.k,
                x.k_prime
            );
        }
    }
}
