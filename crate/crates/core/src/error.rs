use alloc::string::String;
use core::fmt;

/// Errors produced by the estimation core.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    DuplicateQuery { query_id: String },
    DuplicateCandidate { query_id: String, doc_id: String },
    EmptyCandidates { query_id: String },
    MissingRelevance { query_id: String, doc_id: String },
    UnlabeledRelevance { query_id: String, doc_id: String },
    UnknownQuery { query_id: String },
    UnknownDocument { query_id: String, doc_id: String },
    UnknownRanker { ranker_id: String },
    /// A ranking is not a permutation of its query's candidate set.
    NotAPermutation { query_id: String },
    ClickLengthMismatch { query_id: String, expected: usize, found: usize },
    /// Two rankings for the same (ranker, query) differ, which a deterministic
    /// ranker cannot produce.
    InconsistentRanking { ranker_id: String, query_id: String },
    MissingRanking { ranker_id: String, query_id: String },
    MissingLogSize { ranker_id: String },
    CatalogMismatch,
    EmptyLogs,
    InvalidArgument(String),
    InvalidConfig(String),
    /// The denominator position has no clicks inside the interventional set.
    UndefinedRatio { k: usize, k_prime: usize },
    MissingPair { k: usize, k_prime: usize },
    ParameterOutOfRange { name: String, value: f64 },
    /// The statistics cannot pin down any relative propensity.
    EstimationImpossible(String),
}

impl Error {
    /// True for outcomes where the data is valid but carries no usable
    /// intervention information.
    pub fn is_estimation_impossible(&self) -> bool {
        matches!(self, Error::EstimationImpossible(_) | Error::UndefinedRatio { .. })
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Error::*;
        match self {
            DuplicateQuery { query_id } => write!(f, "duplicate query_id `{query_id}`"),
            DuplicateCandidate { query_id, doc_id } => {
                write!(f, "duplicate candidate `{doc_id}` in query `{query_id}`")
            }
            EmptyCandidates { query_id } => write!(f, "query `{query_id}` has no candidates"),
            MissingRelevance { query_id, doc_id } => {
                write!(f, "candidate `{doc_id}` of query `{query_id}` has no relevance label")
            }
            UnlabeledRelevance { query_id, doc_id } => write!(
                f,
                "relevance label for `{doc_id}` in query `{query_id}` is not a candidate"
            ),
            UnknownQuery { query_id } => write!(f, "unknown query `{query_id}`"),
            UnknownDocument { query_id, doc_id } => {
                write!(f, "unknown document `{doc_id}` for query `{query_id}`")
            }
            UnknownRanker { ranker_id } => write!(f, "unknown ranker `{ranker_id}`"),
            NotAPermutation { query_id } => write!(
                f,
                "ranking for query `{query_id}` is not a permutation of its candidates"
            ),
            ClickLengthMismatch { query_id, expected, found } => write!(
                f,
                "click vector for query `{query_id}` has length {found}, ranking has {expected}"
            ),
            InconsistentRanking { ranker_id, query_id } => write!(
                f,
                "ranker `{ranker_id}` presented different rankings for query `{query_id}`"
            ),
            MissingRanking { ranker_id, query_id } => {
                write!(f, "no ranking for ranker `{ranker_id}` on query `{query_id}`")
            }
            MissingLogSize { ranker_id } => write!(f, "no log size for ranker `{ranker_id}`"),
            CatalogMismatch => write!(f, "inputs refer to different query catalogs"),
            EmptyLogs => write!(f, "click log is empty"),
            InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            UndefinedRatio { k, k_prime } => write!(
                f,
                "ratio p{k}/p{k_prime} undefined: no clicks at position {k_prime} in the set"
            ),
            MissingPair { k, k_prime } => write!(f, "no parameter for pair {{{k},{k_prime}}}"),
            ParameterOutOfRange { name, value } => {
                write!(f, "parameter {name} = {value} outside (0,1)")
            }
            EstimationImpossible(msg) => write!(f, "estimation impossible: {msg}"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
