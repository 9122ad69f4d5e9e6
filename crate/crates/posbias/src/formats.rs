//! Line-delimited JSON files for corpora, click logs, rankings, pair
//! statistics and estimates.
//!
//! Every file starts with a header line such as
//! `{"format":"clicklog","version":1}`. Blank lines are ignored and line
//! numbers in errors are 1-based, counting the header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use posbias_core::{
    Catalog, Corpus, LogCollection, PairStats, PairwiseEstimate, PropensityEstimate, QueryRecord,
    RankingTable,
};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const VERSION: u32 = 1;
pub const CORPUS_FORMAT: &str = "corpus";
pub const CLICKLOG_FORMAT: &str = "clicklog";
pub const RANKINGS_FORMAT: &str = "rankings";
pub const PAIRSTATS_FORMAT: &str = "pairstats";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invalid {
        line: usize,
        source: posbias_core::Error,
    },
    #[error(transparent)]
    Core(#[from] posbias_core::Error),
}

impl FormatError {
    fn parse(line: usize, message: impl Into<String>) -> Self {
        FormatError::Parse {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusLine {
    query_id: String,
    candidates: Vec<String>,
    relevance: BTreeMap<String, u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogLine {
    ranker_id: String,
    query_id: String,
    ranking: Vec<String>,
    clicks: Vec<u8>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RankingLine {
    ranker_id: String,
    query_id: String,
    ranking: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PairStatsLine {
    pub k: usize,
    pub k_prime: usize,
    pub c_at_k: f64,
    pub c_at_k_prime: f64,
    pub notc_at_k: f64,
    pub notc_at_k_prime: f64,
    pub impressions_at_k: u64,
    pub impressions_at_k_prime: u64,
}

/// Estimate output file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateFile {
    pub method: String,
    pub top_k: usize,
    /// `p̂_k / p̂_1` for k = 1..=top_k; `null` where unidentifiable.
    pub rel_propensity: Vec<Option<f64>>,
    pub unidentifiable: Vec<usize>,
    pub objective_value: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
}

impl From<&PropensityEstimate> for EstimateFile {
    fn from(e: &PropensityEstimate) -> Self {
        EstimateFile {
            method: "mle".into(),
            top_k: e.cutoff,
            rel_propensity: e.rel_propensity.clone(),
            unidentifiable: e.unidentifiable.clone(),
            objective_value: Some(e.objective_value),
            iterations: Some(e.iterations),
            converged: Some(e.converged),
        }
    }
}

impl From<&PairwiseEstimate> for EstimateFile {
    fn from(e: &PairwiseEstimate) -> Self {
        EstimateFile {
            method: "pairwise".into(),
            top_k: e.cutoff,
            rel_propensity: e.rel_propensity.clone(),
            unidentifiable: e.unidentifiable.clone(),
            objective_value: None,
            iterations: None,
            converged: None,
        }
    }
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines<R: BufRead>(reader: R) -> impl Iterator<Item = io::Result<(usize, String)>> {
    reader
        .lines()
        .enumerate()
        .map(|(i, l)| l.map(|l| (i + 1, l)))
        .filter(|r| !matches!(r, Ok((_, l)) if l.trim().is_empty()))
}

/// Reads the header (if any) and returns the remaining parsed body lines.
/// An entirely empty input yields no lines and no error.
fn read_body<R: BufRead, T: for<'de> Deserialize<'de>>(
    reader: R,
    format: &str,
) -> Result<Vec<(usize, T)>, FormatError> {
    let mut lines = numbered_lines(reader);
    let Some(first) = lines.next() else {
        return Ok(Vec::new());
    };
    let (line, text) = first?;
    let header: Header = serde_json::from_str(&text)
        .map_err(|e| FormatError::parse(line, format!("expected {format} header: {e}")))?;
    if header.format != format {
        return Err(FormatError::parse(
            line,
            format!("expected format `{format}`, found `{}`", header.format),
        ));
    }
    if header.version != VERSION {
        return Err(FormatError::parse(
            line,
            format!("unsupported {format} version {}", header.version),
        ));
    }
    lines
        .map(|r| {
            let (line, text) = r?;
            serde_json::from_str(&text)
                .map(|v| (line, v))
                .map_err(|e| FormatError::parse(line, e.to_string()))
        })
        .collect()
}

fn write_header<W: Write>(w: &mut W, format: &str) -> io::Result<()> {
    let header = Header {
        format: format.into(),
        version: VERSION,
    };
    serde_json::to_writer(&mut *w, &header)?;
    writeln!(w)
}

fn write_line<W: Write, T: Serialize>(w: &mut W, value: &T) -> io::Result<()> {
    serde_json::to_writer(&mut *w, value)?;
    writeln!(w)
}

fn binary(line: usize, v: u8, what: &str) -> Result<bool, FormatError> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(FormatError::parse(line, format!("{what} must be 0 or 1, got {v}"))),
    }
}

pub fn read_corpus<R: BufRead>(reader: R) -> Result<Corpus, FormatError> {
    let body: Vec<(usize, CorpusLine)> = read_body(reader, CORPUS_FORMAT)?;
    let mut queries = Vec::with_capacity(body.len());
    let mut seen = std::collections::BTreeSet::new();
    for (line, rec) in body {
        let labels = rec
            .relevance
            .iter()
            .map(|(d, &v)| binary(line, v, "relevance").map(|b| (d.clone(), b)))
            .collect::<Result<BTreeMap<_, _>, _>>()?;
        let invalid = |source| FormatError::Invalid { line, source };
        if !seen.insert(rec.query_id.clone()) {
            return Err(invalid(posbias_core::Error::DuplicateQuery {
                query_id: rec.query_id,
            }));
        }
        // Validate candidates per line so errors carry the line number.
        Catalog::new(vec![(rec.query_id.clone(), rec.candidates.clone())]).map_err(invalid)?;
        let q = QueryRecord::from_labels(rec.query_id, rec.candidates, &labels).map_err(invalid)?;
        queries.push(q);
    }
    Ok(Corpus::new(queries)?)
}

pub fn write_corpus<W: Write>(mut w: W, corpus: &Corpus) -> io::Result<()> {
    write_header(&mut w, CORPUS_FORMAT)?;
    for q in corpus.queries() {
        let relevance = q
            .candidates
            .iter()
            .zip(&q.relevance)
            .map(|(d, &r)| (d.clone(), u8::from(r)))
            .collect();
        write_line(
            &mut w,
            &CorpusLine {
                query_id: q.query_id.clone(),
                candidates: q.candidates.clone(),
                relevance,
            },
        )?;
    }
    w.flush()
}

/// Reads a click log. With a corpus, ids are resolved against it; without
/// one, each query's candidate set is taken from its records, with queries
/// and documents indexed in sorted id order.
pub fn read_logs<R: BufRead>(reader: R, corpus: Option<&Corpus>) -> Result<LogCollection, FormatError> {
    let body: Vec<(usize, LogLine)> = read_body(reader, CLICKLOG_FORMAT)?;
    let catalog = match corpus {
        Some(c) => c.catalog(),
        None => infer_catalog(body.iter().map(|(_, l)| (&l.query_id, &l.ranking)))?,
    };
    let mut logs = LogCollection::new(catalog);
    for (line, rec) in body {
        let clicks = rec
            .clicks
            .iter()
            .map(|&c| binary(line, c, "click"))
            .collect::<Result<Vec<_>, _>>()?;
        logs.push_ids(&rec.ranker_id, &rec.query_id, &rec.ranking, clicks)
            .map_err(|source| FormatError::Invalid { line, source })?;
    }
    Ok(logs)
}

fn infer_catalog<'a>(
    records: impl Iterator<Item = (&'a String, &'a Vec<String>)>,
) -> Result<Catalog, FormatError> {
    let mut candidates: BTreeMap<&String, &Vec<String>> = BTreeMap::new();
    for (q, ranking) in records {
        candidates.entry(q).or_insert(ranking);
    }
    let entries = candidates
        .into_iter()
        .map(|(q, r)| {
            let mut docs = r.clone();
            docs.sort();
            (q.clone(), docs)
        })
        .collect();
    Ok(Catalog::new(entries)?)
}

pub fn write_logs<W: Write>(mut w: W, logs: &LogCollection) -> io::Result<()> {
    write_header(&mut w, CLICKLOG_FORMAT)?;
    let catalog = logs.catalog();
    for rec in logs.records() {
        let q = catalog.query(rec.query);
        write_line(
            &mut w,
            &LogLine {
                ranker_id: logs.rankers()[rec.ranker].clone(),
                query_id: q.query_id.clone(),
                ranking: rec.ranking.iter().map(|&d| q.candidates[d].clone()).collect(),
                clicks: rec.clicks.iter().map(|&c| u8::from(c)).collect(),
            },
        )?;
    }
    w.flush()
}

/// Reads a rankings file against `catalog`.
pub fn read_rankings<R: BufRead>(reader: R, catalog: &Catalog) -> Result<RankingTable, FormatError> {
    let body: Vec<(usize, RankingLine)> = read_body(reader, RANKINGS_FORMAT)?;
    let mut table = RankingTable::new(catalog.clone());
    for (line, rec) in body {
        let invalid = |source| FormatError::Invalid { line, source };
        let query = catalog.find_query(&rec.query_id).ok_or_else(|| {
            invalid(posbias_core::Error::UnknownQuery {
                query_id: rec.query_id.clone(),
            })
        })?;
        let ranking = catalog
            .query(query)
            .resolve_ranking(&rec.ranking)
            .map_err(invalid)?;
        let ranker = table.ranker_index(&rec.ranker_id);
        table.insert(ranker, query, ranking).map_err(invalid)?;
    }
    Ok(table)
}

pub fn write_rankings<W: Write>(mut w: W, table: &RankingTable) -> io::Result<()> {
    write_header(&mut w, RANKINGS_FORMAT)?;
    for ((ranker, query), _) in table.entries() {
        let ids = table.ranking_ids(ranker, query).unwrap_or_default();
        write_line(
            &mut w,
            &RankingLine {
                ranker_id: table.rankers()[ranker].clone(),
                query_id: table.catalog().query(query).query_id.clone(),
                ranking: ids.into_iter().map(String::from).collect(),
            },
        )?;
    }
    w.flush()
}

pub fn pair_stats_lines(stats: &PairStats) -> Vec<PairStatsLine> {
    stats
        .iter()
        .map(|p| PairStatsLine {
            k: p.k,
            k_prime: p.k_prime,
            c_at_k: p.at_k.clicks,
            c_at_k_prime: p.at_k_prime.clicks,
            notc_at_k: p.at_k.no_clicks,
            notc_at_k_prime: p.at_k_prime.no_clicks,
            impressions_at_k: p.at_k.impressions,
            impressions_at_k_prime: p.at_k_prime.impressions,
        })
        .collect()
}

pub fn write_pair_stats<W: Write>(mut w: W, stats: &PairStats) -> io::Result<()> {
    write_header(&mut w, PAIRSTATS_FORMAT)?;
    for line in pair_stats_lines(stats) {
        write_line(&mut w, &line)?;
    }
    w.flush()
}

pub fn read_pair_stats_lines<R: BufRead>(reader: R) -> Result<Vec<PairStatsLine>, FormatError> {
    Ok(read_body(reader, PAIRSTATS_FORMAT)?
        .into_iter()
        .map(|(_, l)| l)
        .collect())
}

pub fn write_estimate<W: Write>(mut w: W, estimate: &EstimateFile) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, estimate)?;
    writeln!(w)?;
    w.flush()
}

pub fn read_estimate<R: BufRead>(reader: R) -> Result<EstimateFile, FormatError> {
    serde_json::from_reader(reader).map_err(|e| FormatError::parse(e.line(), e.to_string()))
}

fn open(path: &Path) -> Result<BufReader<File>, FormatError> {
    Ok(BufReader::new(File::open(path)?))
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus, FormatError> {
    read_corpus(open(path.as_ref())?)
}

pub fn save_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> io::Result<()> {
    write_corpus(create(path.as_ref())?, corpus)
}

pub fn load_logs(path: impl AsRef<Path>, corpus: Option<&Corpus>) -> Result<LogCollection, FormatError> {
    read_logs(open(path.as_ref())?, corpus)
}

pub fn save_logs(path: impl AsRef<Path>, logs: &LogCollection) -> io::Result<()> {
    write_logs(create(path.as_ref())?, logs)
}

pub fn load_rankings(path: impl AsRef<Path>, catalog: &Catalog) -> Result<RankingTable, FormatError> {
    read_rankings(open(path.as_ref())?, catalog)
}

pub fn save_rankings(path: impl AsRef<Path>, table: &RankingTable) -> io::Result<()> {
    write_rankings(create(path.as_ref())?, table)
}

pub fn save_pair_stats(path: impl AsRef<Path>, stats: &PairStats) -> io::Result<()> {
    write_pair_stats(create(path.as_ref())?, stats)
}

pub fn save_estimate(path: impl AsRef<Path>, estimate: &EstimateFile) -> io::Result<()> {
    write_estimate(create(path.as_ref())?, estimate)
}

pub fn load_estimate(path: impl AsRef<Path>) -> Result<EstimateFile, FormatError> {
    read_estimate(open(path.as_ref())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus_text(body: &str) -> String {
        format!("{{\"format\":\"corpus\",\"version\":1}}\n{body}")
    }

    #[test]
    fn minimal_corpus() {
        let text = corpus_text(r#"{"query_id":"q1","candidates":["a","b"],"relevance":{"a":1,"b":0}}"#);
        let c = read_corpus(text.as_bytes()).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.queries()[0].candidates, vec!["a", "b"]);
        assert_eq!(c.queries()[0].relevance, vec![true, false]);
    }

    #[test]
    fn duplicate_query_names_it() {
        let line = r#"{"query_id":"q7","candidates":["a"],"relevance":{"a":1}}"#;
        let text = corpus_text(&format!("{line}\n{line}\n"));
        let err = read_corpus(text.as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Invalid { line: 3, .. }), "{err}");
        assert!(err.to_string().contains("q7"));
    }

    #[test]
    fn malformed_line_reports_number() {
        let text = corpus_text("{\"query_id\":\"q1\",\"candidates\":[\"a\"],\"relevance\":{\"a\":1}}\nnot json\n");
        let err = read_corpus(text.as_bytes()).unwrap_err();
        assert!(matches!(err, FormatError::Parse { line: 3, .. }), "{err}");
        let text = corpus_text(r#"{"query_id":"q1","candidates":[],"relevance":{}}"#);
        assert!(matches!(
            read_corpus(text.as_bytes()),
            Err(FormatError::Invalid { line: 2, .. })
        ));
        let text = corpus_text(r#"{"query_id":"q1","candidates":["a"],"relevance":{"a":2}}"#);
        assert!(matches!(
            read_corpus(text.as_bytes()),
            Err(FormatError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn wrong_header() {
        let text = "{\"format\":\"clicklog\",\"version\":1}\n";
        assert!(matches!(
            read_corpus(text.as_bytes()),
            Err(FormatError::Parse { line: 1, .. })
        ));
        let text = "{\"format\":\"corpus\",\"version\":9}\n";
        assert!(read_corpus(text.as_bytes()).is_err());
    }

    #[test]
    fn empty_log_file() {
        let logs = read_logs(&b""[..], None).unwrap();
        assert!(logs.is_empty());
        assert!(logs.log_sizes().is_empty());
    }

    #[test]
    fn log_validation_errors() {
        let head = "{\"format\":\"clicklog\",\"version\":1}\n";
        let text = format!("{head}{}", r#"{"ranker_id":"A","query_id":"q1","ranking":["a","b"],"clicks":[1]}"#);
        assert!(matches!(
            read_logs(text.as_bytes(), None),
            Err(FormatError::Invalid {
                line: 2,
                source: posbias_core::Error::ClickLengthMismatch { .. }
            })
        ));
        let corpus = read_corpus(
            corpus_text(r#"{"query_id":"q1","candidates":["a","b"],"relevance":{"a":1,"b":0}}"#)
                .as_bytes(),
        )
        .unwrap();
        let text = format!("{head}{}", r#"{"ranker_id":"A","query_id":"q2","ranking":["a","b"],"clicks":[1,0]}"#);
        assert!(matches!(
            read_logs(text.as_bytes(), Some(&corpus)),
            Err(FormatError::Invalid {
                source: posbias_core::Error::UnknownQuery { .. },
                ..
            })
        ));
        let text = format!("{head}{}", r#"{"ranker_id":"A","query_id":"q1","ranking":["a","z"],"clicks":[1,0]}"#);
        assert!(matches!(
            read_logs(text.as_bytes(), Some(&corpus)),
            Err(FormatError::Invalid {
                source: posbias_core::Error::UnknownDocument { .. },
                ..
            })
        ));
    }

    #[test]
    fn standalone_logs_infer_candidates() {
        let head = "{\"format\":\"clicklog\",\"version\":1}\n";
        let body = [
            r#"{"ranker_id":"A","query_id":"q1","ranking":["a","b","c"],"clicks":[1,0,0]}"#,
            r#"{"ranker_id":"A","query_id":"q1","ranking":["a","b","c"],"clicks":[0,0,1]}"#,
            r#"{"ranker_id":"A","query_id":"q1","ranking":["a","b","c"],"clicks":[0,0,0]}"#,
            r#"{"ranker_id":"B","query_id":"q1","ranking":["c","a","b"],"clicks":[0,0,0]}"#,
            r#"{"ranker_id":"B","query_id":"q1","ranking":["c","a","b"],"clicks":[1,1,0]}"#,
        ];
        let logs = read_logs(format!("{head}{}\n", body.join("\n")).as_bytes(), None).unwrap();
        let sizes = logs.log_sizes();
        assert_eq!(sizes["A"], 3);
        assert_eq!(sizes["B"], 2);
        let mut out = Vec::new();
        write_logs(&mut out, &logs).unwrap();
        assert_eq!(read_logs(&out[..], None).unwrap(), logs);
    }
}
