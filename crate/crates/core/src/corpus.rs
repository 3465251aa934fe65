//! Canonical data model and IO for articles, segments, dependency graphs,
//! and URL-disjoint splits.
//!
//! Corpus files are line-delimited JSON: one article (or graph) per line.
//! All values here are immutable after construction and safe to share across
//! threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("article {article}: field {field}: {message}")]
    Schema {
        article: String,
        field: String,
        message: String,
    },
    #[error("graph for article {article}: {message}")]
    Graph { article: String, message: String },
    #[error("split fractions must be non-negative and sum to 1, got ({0}, {1}, {2})")]
    Fractions(f64, f64, f64),
    #[error("{urls} distinct urls cannot populate {splits} non-empty splits")]
    NotEnoughUrls { urls: usize, splits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Wikihow,
    Instructables,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub text: String,
}

/// An ordered multi-step instruction with its goal text; the unit of context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Article {
    pub id: String,
    pub source: Source,
    pub url: String,
    pub goal: String,
    pub steps: Vec<Step>,
}

impl Article {
    /// Check step contiguity and non-emptiness.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.id.is_empty() {
            return Err(CorpusError::Schema {
                article: "<unnamed>".into(),
                field: "id".into(),
                message: "empty id".into(),
            });
        }
        for (i, step) in self.steps.iter().enumerate() {
            if step.index != i {
                return Err(CorpusError::Schema {
                    article: self.id.clone(),
                    field: format!("steps[{i}].index"),
                    message: format!("expected {i}, got {} (indices must be 0..n contiguous)", step.index),
                });
            }
            if step.text.trim().is_empty() {
                return Err(CorpusError::Schema {
                    article: self.id.clone(),
                    field: format!("steps[{i}].text"),
                    message: "step text empty after whitespace trim".into(),
                });
            }
        }
        Ok(())
    }

    pub fn step_text(&self, index: usize) -> Option<&str> {
        self.steps.get(index).map(|s| s.text.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Actionable,
    Condition,
    Unspecified,
}

/// A character span of interest within one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub id: String,
    pub step_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub kind: SegmentKind,
}

impl Segment {
    /// The segment's text within `article`, or `None` when out of bounds.
    pub fn text<'a>(&self, article: &'a Article) -> Option<&'a str> {
        let step = article.step_text(self.step_index)?;
        if self.char_start < self.char_end && self.char_end <= text::char_len(step) {
            Some(text::char_slice(step, self.char_start, self.char_end))
        } else {
            None
        }
    }

    /// Deterministic id for a span: `s{step}_{start}_{end}`.
    pub fn span_id(step_index: usize, char_start: usize, char_end: usize) -> String {
        format!("s{step_index}_{char_start}_{char_end}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Null,
    Precondition,
    Postcondition,
}

/// A directed, labeled link between two segments of one article.
///
/// `NULL` never appears on a stored edge; absence encodes it.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub head: String,
    pub tail: String,
    pub label: RelationLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Human,
    Weak,
    Pseudo,
}

/// Directed labeled edges over an article's segments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub article_id: String,
    pub provenance: Provenance,
    pub segments: Vec<Segment>,
    pub edges: Vec<Edge>,
}

impl DependencyGraph {
    pub fn empty(article_id: impl Into<String>, provenance: Provenance) -> Self {
        DependencyGraph {
            article_id: article_id.into(),
            provenance,
            segments: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Structural invariants: unique segment ids, valid spans, edge endpoints
    /// resolve, no self-loops, no duplicate (head, tail, label) triples, no
    /// stored NULL labels.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let err = |message: String| CorpusError::Graph {
            article: self.article_id.clone(),
            message,
        };
        let mut ids = BTreeSet::new();
        for seg in &self.segments {
            if seg.char_start >= seg.char_end {
                return Err(err(format!(
                    "segment {}: empty or inverted span [{}, {})",
                    seg.id, seg.char_start, seg.char_end
                )));
            }
            if !ids.insert(seg.id.as_str()) {
                return Err(err(format!("duplicate segment id {}", seg.id)));
            }
        }
        let mut triples = BTreeSet::new();
        for edge in &self.edges {
            if edge.label == RelationLabel::Null {
                return Err(err(format!(
                    "edge {} -> {}: NULL must not be stored",
                    edge.head, edge.tail
                )));
            }
            if edge.head == edge.tail {
                return Err(err(format!("self-loop on segment {}", edge.head)));
            }
            for endpoint in [&edge.head, &edge.tail] {
                if !ids.contains(endpoint.as_str()) {
                    return Err(err(format!("edge references unknown segment id {endpoint}")));
                }
            }
            if !triples.insert((edge.head.as_str(), edge.tail.as_str(), edge.label)) {
                return Err(err(format!(
                    "duplicate edge ({}, {}, {:?})",
                    edge.head, edge.tail, edge.label
                )));
            }
        }
        Ok(())
    }

    /// Validate spans against the article's step texts.
    pub fn validate_against(&self, article: &Article) -> Result<(), CorpusError> {
        self.validate()?;
        for seg in &self.segments {
            let step = article.step_text(seg.step_index).ok_or_else(|| CorpusError::Graph {
                article: self.article_id.clone(),
                message: format!("segment {}: step {} out of range", seg.id, seg.step_index),
            })?;
            if seg.char_end > text::char_len(step) {
                return Err(CorpusError::Graph {
                    article: self.article_id.clone(),
                    message: format!(
                        "segment {}: span [{}, {}) exceeds step {} length {}",
                        seg.id,
                        seg.char_start,
                        seg.char_end,
                        seg.step_index,
                        text::char_len(step)
                    ),
                });
            }
        }
        Ok(())
    }

    pub fn segment(&self, id: &str) -> Option<&Segment> {
        self.segments.iter().find(|s| s.id == id)
    }
}

/// Load a line-delimited corpus file, rejecting the whole file on any schema
/// violation.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Article>, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut articles = Vec::new();
    let mut seen = BTreeSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let article: Article =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        article.validate()?;
        if !seen.insert(article.id.clone()) {
            return Err(CorpusError::Schema {
                article: article.id.clone(),
                field: "id".into(),
                message: "duplicate article id in corpus".into(),
            });
        }
        articles.push(article);
    }
    Ok(articles)
}

/// Write articles as line-delimited JSON, sorted by id.
pub fn save_corpus(path: impl AsRef<Path>, articles: &[Article]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    for article in articles {
        article.validate()?;
    }
    let mut sorted: Vec<&Article> = articles.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut out = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for article in sorted {
        let line = serde_json::to_string(article).expect("article serializes");
        writeln!(out, "{line}").map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// Load a line-delimited graph file; every graph is validated.
pub fn load_graphs(path: impl AsRef<Path>) -> Result<Vec<DependencyGraph>, CorpusError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut graphs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let graph: DependencyGraph =
            serde_json::from_str(&line).map_err(|source| CorpusError::Json { line: i + 1, source })?;
        graph.validate()?;
        graphs.push(graph);
    }
    Ok(graphs)
}

/// Serialize one graph to `path`; invariant violations error before any write.
pub fn serialize_graph(graph: &DependencyGraph, path: impl AsRef<Path>) -> Result<(), CorpusError> {
    save_graphs(path, std::slice::from_ref(graph))
}

/// Write graphs as line-delimited JSON sorted by article id. All graphs are
/// validated before the file is created.
pub fn save_graphs(path: impl AsRef<Path>, graphs: &[DependencyGraph]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    for graph in graphs {
        graph.validate()?;
    }
    let mut sorted: Vec<&DependencyGraph> = graphs.iter().collect();
    sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    let mut out = fs::File::create(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for graph in sorted {
        let line = serde_json::to_string(graph).expect("graph serializes");
        writeln!(out, "{line}").map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

/// A URL-disjoint partition of article ids into train/dev/test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: BTreeSet<String>,
    pub dev: BTreeSet<String>,
    pub test: BTreeSet<String>,
    pub seed: u64,
    #[serde(skip)]
    pub fractions: (f64, f64, f64),
}

impl SplitSpec {
    pub fn realized_counts(&self) -> (usize, usize, usize) {
        (self.train.len(), self.dev.len(), self.test.len())
    }

    pub fn contains(&self, id: &str) -> bool {
        self.train.contains(id) || self.dev.contains(id) || self.test.contains(id)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let json = serde_json::to_string(self).expect("splits serialize");
        fs::write(path, json + "\n").map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&raw).map_err(|source| CorpusError::Json { line: 1, source })
    }
}

/// Randomly partition articles at URL granularity.
///
/// URLs are shuffled with the seed and whole URL groups are assigned
/// greedily until each split reaches its target article count, so realized
/// sizes may deviate from the targets by up to the largest URL group.
pub fn make_splits(
    articles: &[Article],
    fractions: (f64, f64, f64),
    seed: u64,
) -> Result<SplitSpec, CorpusError> {
    let (ft, fd, fe) = fractions;
    if ft < 0.0 || fd < 0.0 || fe < 0.0 || (ft + fd + fe - 1.0).abs() > 1e-9 {
        return Err(CorpusError::Fractions(ft, fd, fe));
    }
    let mut by_url: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for article in articles {
        by_url.entry(article.url.as_str()).or_default().push(article.id.as_str());
    }
    let non_empty = [ft, fd, fe].iter().filter(|f| **f > 0.0).count();
    if by_url.len() < non_empty {
        return Err(CorpusError::NotEnoughUrls {
            urls: by_url.len(),
            splits: non_empty,
        });
    }

    let mut groups: Vec<(&str, Vec<&str>)> = by_url.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    groups.shuffle(&mut rng);

    let n = articles.len() as f64;
    // largest-remainder targets so they sum to the article count
    let raw = [ft * n, fd * n, fe * n];
    let mut targets: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut rest: Vec<(usize, f64)> = raw
        .iter()
        .enumerate()
        .map(|(i, x)| (i, x - x.floor()))
        .collect();
    rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut deficit = articles.len() - targets.iter().sum::<usize>();
    for (i, _) in rest {
        if deficit == 0 {
            break;
        }
        targets[i] += 1;
        deficit -= 1;
    }

    let mut sets = [BTreeSet::new(), BTreeSet::new(), BTreeSet::new()];
    let mut counts = [0usize; 3];
    let mut current = 0usize;
    for (_, ids) in groups {
        while current < 2 && counts[current] >= targets[current] {
            current += 1;
        }
        counts[current] += ids.len();
        for id in ids {
            sets[current].insert(id.to_string());
        }
    }
    let [train, dev, test] = sets;
    Ok(SplitSpec {
        train,
        dev,
        test,
        seed,
        fractions,
    })
}
