//! Queries, candidate sets, ranker outputs and click logs.
//!
//! Identifiers are opaque strings at the boundary. Internally every query is
//! addressed by its index in a shared [`Catalog`], and every document by its
//! index in that query's candidate list, so rankings are stored as
//! permutations of candidate indices.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One query of a relevance corpus with binary ground-truth labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryRecord {
    pub query_id: String,
    pub candidates: Vec<String>,
    /// Aligned with `candidates`.
    pub relevance: Vec<bool>,
}

impl QueryRecord {
    /// Builds a record from a candidate list and a label lookup. Every
    /// candidate must be labelled and every label must name a candidate.
    pub fn from_labels(
        query_id: String,
        candidates: Vec<String>,
        labels: &BTreeMap<String, bool>,
    ) -> Result<Self> {
        let mut relevance = Vec::with_capacity(candidates.len());
        for doc in &candidates {
            match labels.get(doc) {
                Some(&label) => relevance.push(label),
                None => {
                    return Err(Error::MissingRelevance {
                        query_id,
                        doc_id: doc.clone(),
                    })
                }
            }
        }
        if labels.len() != candidates.len() {
            let known: BTreeSet<&String> = candidates.iter().collect();
            if let Some(extra) = labels.keys().find(|d| !known.contains(d)) {
                return Err(Error::UnlabeledRelevance {
                    query_id,
                    doc_id: extra.clone(),
                });
            }
        }
        Ok(QueryRecord {
            query_id,
            candidates,
            relevance,
        })
    }

    pub fn label(&self, doc_id: &str) -> Option<bool> {
        self.candidates
            .iter()
            .position(|d| d == doc_id)
            .map(|i| self.relevance[i])
    }
}

/// A validated relevance corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    queries: Vec<QueryRecord>,
}

impl Corpus {
    pub fn new(queries: Vec<QueryRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for q in &queries {
            if !seen.insert(q.query_id.as_str()) {
                return Err(Error::DuplicateQuery {
                    query_id: q.query_id.clone(),
                });
            }
            check_candidates(&q.query_id, &q.candidates)?;
            if q.relevance.len() != q.candidates.len() {
                let doc = q.candidates.get(q.relevance.len()).cloned().unwrap_or_default();
                return Err(Error::MissingRelevance {
                    query_id: q.query_id.clone(),
                    doc_id: doc,
                });
            }
        }
        Ok(Corpus { queries })
    }

    pub fn queries(&self) -> &[QueryRecord] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Catalog of this corpus, with query and document indices in corpus order.
    pub fn catalog(&self) -> Catalog {
        let entries = self
            .queries
            .iter()
            .map(|q| (q.query_id.clone(), q.candidates.clone()))
            .collect();
        Catalog::new(entries).expect("corpus was validated on construction")
    }
}

fn check_candidates(query_id: &str, candidates: &[String]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates {
            query_id: query_id.into(),
        });
    }
    let mut seen = BTreeSet::new();
    for d in candidates {
        if !seen.insert(d.as_str()) {
            return Err(Error::DuplicateCandidate {
                query_id: query_id.into(),
                doc_id: d.clone(),
            });
        }
    }
    Ok(())
}

/// Candidate documents of one query, with an id → index lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryCandidates {
    pub query_id: String,
    pub candidates: Vec<String>,
    doc_index: BTreeMap<String, usize>,
}

impl QueryCandidates {
    pub fn find_doc(&self, doc_id: &str) -> Option<usize> {
        self.doc_index.get(doc_id).copied()
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    /// Resolves a list of document ids into candidate indices, checking that
    /// the list is a permutation of the candidate set.
    pub fn resolve_ranking<S: AsRef<str>>(&self, ranking: &[S]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(ranking.len());
        for d in ranking {
            let d = d.as_ref();
            match self.find_doc(d) {
                Some(i) => out.push(i),
                None => {
                    return Err(Error::UnknownDocument {
                        query_id: self.query_id.clone(),
                        doc_id: d.into(),
                    })
                }
            }
        }
        self.check_permutation(&out)?;
        Ok(out)
    }

    fn check_permutation(&self, ranking: &[usize]) -> Result<()> {
        let n = self.candidates.len();
        let mut seen = vec![false; n];
        if ranking.len() != n {
            return Err(Error::NotAPermutation {
                query_id: self.query_id.clone(),
            });
        }
        for &i in ranking {
            if i >= n || seen[i] {
                return Err(Error::NotAPermutation {
                    query_id: self.query_id.clone(),
                });
            }
            seen[i] = true;
        }
        Ok(())
    }
}

#[derive(Debug, PartialEq, Eq)]
struct CatalogInner {
    queries: Vec<QueryCandidates>,
    index: BTreeMap<String, usize>,
}

/// Shared, immutable table of queries and their candidate sets.
///
/// Cloning is cheap; equality compares contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog(Arc<CatalogInner>);

impl Catalog {
    pub fn new(entries: Vec<(String, Vec<String>)>) -> Result<Self> {
        let mut index = BTreeMap::new();
        let mut queries = Vec::with_capacity(entries.len());
        for (i, (query_id, candidates)) in entries.into_iter().enumerate() {
            check_candidates(&query_id, &candidates)?;
            if index.insert(query_id.clone(), i).is_some() {
                return Err(Error::DuplicateQuery { query_id });
            }
            let doc_index = candidates
                .iter()
                .enumerate()
                .map(|(j, d)| (d.clone(), j))
                .collect();
            queries.push(QueryCandidates {
                query_id,
                candidates,
                doc_index,
            });
        }
        Ok(Catalog(Arc::new(CatalogInner { queries, index })))
    }

    pub fn queries(&self) -> &[QueryCandidates] {
        &self.0.queries
    }

    pub fn query(&self, index: usize) -> &QueryCandidates {
        &self.0.queries[index]
    }

    pub fn find_query(&self, query_id: &str) -> Option<usize> {
        self.0.index.get(query_id).copied()
    }

    pub fn len(&self) -> usize {
        self.0.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.queries.is_empty()
    }

    fn same_as(&self, other: &Catalog) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self == other
    }
}

/// Output of a set of deterministic rankers: one ranking per (ranker, query).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingTable {
    catalog: Catalog,
    rankers: Vec<String>,
    entries: BTreeMap<(usize, usize), Vec<usize>>,
}

impl RankingTable {
    pub fn new(catalog: Catalog) -> Self {
        RankingTable {
            catalog,
            rankers: Vec::new(),
            entries: BTreeMap::new(),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn rankers(&self) -> &[String] {
        &self.rankers
    }

    pub fn find_ranker(&self, ranker_id: &str) -> Option<usize> {
        self.rankers.iter().position(|r| r == ranker_id)
    }

    /// Index of `ranker_id`, registering it if new.
    pub fn ranker_index(&mut self, ranker_id: &str) -> usize {
        match self.find_ranker(ranker_id) {
            Some(i) => i,
            None => {
                self.rankers.push(ranker_id.into());
                self.rankers.len() - 1
            }
        }
    }

    /// Adds the ranking of candidate indices `ranking` for (ranker, query).
    /// A second, different ranking for the same pair is an error.
    pub fn insert(&mut self, ranker: usize, query: usize, ranking: Vec<usize>) -> Result<()> {
        if ranker >= self.rankers.len() {
            return Err(Error::InvalidArgument("ranker index out of range".into()));
        }
        if query >= self.catalog.len() {
            return Err(Error::InvalidArgument("query index out of range".into()));
        }
        self.catalog.query(query).check_permutation(&ranking)?;
        match self.entries.get(&(ranker, query)) {
            Some(existing) if *existing != ranking => Err(Error::InconsistentRanking {
                ranker_id: self.rankers[ranker].clone(),
                query_id: self.catalog.query(query).query_id.clone(),
            }),
            Some(_) => Ok(()),
            None => {
                self.entries.insert((ranker, query), ranking);
                Ok(())
            }
        }
    }

    pub fn get(&self, ranker: usize, query: usize) -> Option<&[usize]> {
        self.entries.get(&(ranker, query)).map(Vec::as_slice)
    }

    /// Rankings keyed by (ranker index, query index), in key order.
    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), &[usize])> + '_ {
        self.entries.iter().map(|(&k, v)| (k, v.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ranking as document ids.
    pub fn ranking_ids(&self, ranker: usize, query: usize) -> Option<Vec<&str>> {
        let q = self.catalog.query(query);
        self.get(ranker, query)
            .map(|r| r.iter().map(|&d| q.candidates[d].as_str()).collect())
    }

    /// Checks that every (ranker, query) present in `self` is present in
    /// `other` with the same ranking. Rankers and queries are matched by id.
    pub fn check_consistent_with(&self, other: &RankingTable) -> Result<()> {
        for (&(r, q), _) in &self.entries {
            let ranker_id = &self.rankers[r];
            let query_id = &self.catalog.query(q).query_id;
            let theirs = other.find_ranker(ranker_id).and_then(|r2| {
                other
                    .catalog
                    .find_query(query_id)
                    .and_then(|q2| other.ranking_ids(r2, q2))
            });
            match theirs {
                None => {
                    return Err(Error::MissingRanking {
                        ranker_id: ranker_id.clone(),
                        query_id: query_id.clone(),
                    })
                }
                Some(ids) if ids != self.ranking_ids(r, q).unwrap_or_default() => {
                    return Err(Error::InconsistentRanking {
                        ranker_id: ranker_id.clone(),
                        query_id: query_id.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        Ok(())
    }
}

/// One logged impression: the ranking a ranker showed for a query and which
/// of its documents were clicked.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClickLogRecord {
    pub ranker: usize,
    pub query: usize,
    /// Candidate indices in presented order.
    pub ranking: Vec<usize>,
    /// Aligned with `ranking`.
    pub clicks: Vec<bool>,
}

/// Click logs of all rankers together with their log sizes `n_i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogCollection {
    catalog: Catalog,
    rankers: Vec<String>,
    records: Vec<ClickLogRecord>,
    log_sizes: Vec<usize>,
}

impl LogCollection {
    pub fn new(catalog: Catalog) -> Self {
        LogCollection {
            catalog,
            rankers: Vec::new(),
            records: Vec::new(),
            log_sizes: Vec::new(),
        }
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn rankers(&self) -> &[String] {
        &self.rankers
    }

    pub fn records(&self) -> &[ClickLogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn find_ranker(&self, ranker_id: &str) -> Option<usize> {
        self.rankers.iter().position(|r| r == ranker_id)
    }

    /// Index of `ranker_id`, registering it (with log size 0) if new.
    pub fn ranker_index(&mut self, ranker_id: &str) -> usize {
        match self.find_ranker(ranker_id) {
            Some(i) => i,
            None => {
                self.rankers.push(ranker_id.into());
                self.log_sizes.push(0);
                self.rankers.len() - 1
            }
        }
    }

    /// Number of records per ranker id.
    pub fn log_sizes(&self) -> BTreeMap<String, usize> {
        self.rankers
            .iter()
            .cloned()
            .zip(self.log_sizes.iter().copied())
            .collect()
    }

    pub fn log_size(&self, ranker: usize) -> usize {
        self.log_sizes[ranker]
    }

    /// Appends a record after checking it against the catalog.
    pub fn push(&mut self, record: ClickLogRecord) -> Result<()> {
        if record.ranker >= self.rankers.len() {
            return Err(Error::InvalidArgument("ranker index out of range".into()));
        }
        if record.query >= self.catalog.len() {
            return Err(Error::InvalidArgument("query index out of range".into()));
        }
        let q = self.catalog.query(record.query);
        if record.clicks.len() != record.ranking.len() {
            return Err(Error::ClickLengthMismatch {
                query_id: q.query_id.clone(),
                expected: record.ranking.len(),
                found: record.clicks.len(),
            });
        }
        q.check_permutation(&record.ranking)?;
        self.log_sizes[record.ranker] += 1;
        self.records.push(record);
        Ok(())
    }

    /// Appends a record given by ids.
    pub fn push_ids<S: AsRef<str>>(
        &mut self,
        ranker_id: &str,
        query_id: &str,
        ranking: &[S],
        clicks: Vec<bool>,
    ) -> Result<()> {
        let query = self
            .catalog
            .find_query(query_id)
            .ok_or_else(|| Error::UnknownQuery {
                query_id: query_id.into(),
            })?;
        let ranking = self.catalog.query(query).resolve_ranking(ranking)?;
        if clicks.len() != ranking.len() {
            return Err(Error::ClickLengthMismatch {
                query_id: query_id.into(),
                expected: ranking.len(),
                found: clicks.len(),
            });
        }
        let ranker = self.ranker_index(ranker_id);
        self.push(ClickLogRecord {
            ranker,
            query,
            ranking,
            clicks,
        })
    }

    /// Appends every record of `other`, matching rankers by id. Both
    /// collections must share a catalog.
    pub fn extend_from(&mut self, other: &LogCollection) -> Result<()> {
        if !self.catalog.same_as(&other.catalog) {
            return Err(Error::CatalogMismatch);
        }
        let map: Vec<usize> = other.rankers.iter().map(|r| self.ranker_index(r)).collect();
        for rec in &other.records {
            let mut rec = rec.clone();
            rec.ranker = map[rec.ranker];
            self.push(rec)?;
        }
        Ok(())
    }
}

/// Recovers the ranking table from the logs.
///
/// Rankers are deterministic functions of the query, so any one record of a
/// (ranker, query) pair carries its ranking; all others must agree.
pub fn derive_rankings(logs: &LogCollection) -> Result<RankingTable> {
    if logs.is_empty() {
        return Err(Error::EmptyLogs);
    }
    let mut table = RankingTable::new(logs.catalog.clone());
    table.rankers = logs.rankers.clone();
    for rec in &logs.records {
        table.insert(rec.ranker, rec.query, rec.ranking.clone())?;
    }
    Ok(table)
}

pub(crate) fn same_catalog(a: &Catalog, b: &Catalog) -> bool {
    a.same_as(b)
}
