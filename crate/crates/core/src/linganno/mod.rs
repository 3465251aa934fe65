//! Linguistic annotation layer: a provider contract producing SRL-style
//! frames, POS tags, coreference chains, and event temporal relations, plus
//! segment proposal from frames.
//!
//! A deterministic rule-based provider ([`RuleProvider`]) ships with the
//! crate so the full pipeline runs offline; adapters around externally
//! trained annotators implement the same [`AnnotationProvider`] contract.

mod provider;

pub use provider::{is_coref_pronoun, RuleProvider};
pub(crate) use provider::is_be_verb;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, Segment, SegmentKind};
use crate::text;

/// POS tags emitted by the bundled provider. Adapters should map onto the
/// same inventory where the heuristics rely on it (DT/JJ/NN/NNS for noun
/// chunks, VBG/VBN for verb forms, RB for adverbs).
pub mod pos {
    pub const PUNCT: &str = "PUNCT";
    pub const CD: &str = "CD";
    pub const BE: &str = "BE";
    pub const MD: &str = "MD";
    pub const DT: &str = "DT";
    pub const PRP: &str = "PRP";
    pub const IN: &str = "IN";
    pub const RB: &str = "RB";
    pub const VB: &str = "VB";
    pub const VBG: &str = "VBG";
    pub const VBN: &str = "VBN";
    pub const JJ: &str = "JJ";
    pub const NN: &str = "NN";
    pub const NNS: &str = "NNS";
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("provider failure ({context}): {message}")]
    Provider { context: String, message: String },
    #[error("article {article}, step {step}: span [{start}, {end}) out of bounds (step length {len})")]
    SpanOutOfBounds {
        article: String,
        step: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("article {article}: {message}")]
    Invalid { article: String, message: String },
    #[error("consensus requires at least one run")]
    NoRuns,
    #[error("temporal runs cover different event pairs")]
    RunsMismatch,
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed annotation JSON: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// A half-open character span within one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenSpan {
    pub step_index: usize,
    pub char_start: usize,
    pub char_end: usize,
}

impl TokenSpan {
    pub fn new(step_index: usize, char_start: usize, char_end: usize) -> Self {
        TokenSpan {
            step_index,
            char_start,
            char_end,
        }
    }

    pub fn overlaps(&self, other: &TokenSpan) -> bool {
        self.step_index == other.step_index
            && self.char_start < other.char_end
            && other.char_start < self.char_end
    }

    pub fn contains(&self, other: &TokenSpan) -> bool {
        self.step_index == other.step_index
            && self.char_start <= other.char_start
            && other.char_end <= self.char_end
    }

    pub fn text<'a>(&self, article: &'a Article) -> Option<&'a str> {
        let step = article.step_text(self.step_index)?;
        if self.char_start < self.char_end && self.char_end <= text::char_len(step) {
            Some(text::char_slice(step, self.char_start, self.char_end))
        } else {
            None
        }
    }
}

/// A token with its POS tag; the step is implied by position in
/// [`LingAnnotations::tokens`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PosToken {
    pub char_start: usize,
    pub char_end: usize,
    pub pos: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlArg {
    pub role: String,
    pub span: TokenSpan,
}

/// A predicate (verb) with labeled argument spans, all within one step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrlFrame {
    pub predicate: TokenSpan,
    pub args: Vec<SrlArg>,
}

impl SrlFrame {
    /// Contiguous hull from the minimum start to maximum end over the
    /// predicate and all arguments.
    pub fn hull(&self) -> TokenSpan {
        let mut start = self.predicate.char_start;
        let mut end = self.predicate.char_end;
        for arg in &self.args {
            start = start.min(arg.span.char_start);
            end = end.max(arg.span.char_end);
        }
        TokenSpan::new(self.predicate.step_index, start, end)
    }
}

/// Mentions of one entity within a single step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorefChain {
    pub mentions: Vec<TokenSpan>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TemporalLabel {
    Before,
    After,
    Vague,
}

impl TemporalLabel {
    pub fn flipped(self) -> TemporalLabel {
        match self {
            TemporalLabel::Before => TemporalLabel::After,
            TemporalLabel::After => TemporalLabel::Before,
            TemporalLabel::Vague => TemporalLabel::Vague,
        }
    }
}

/// Predicted order of two predicate events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalRelation {
    pub event_a: TokenSpan,
    pub event_b: TokenSpan,
    pub relation: TemporalLabel,
}

/// Complete annotations for one article.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "WireAnnotations", into = "WireAnnotations")]
pub struct LingAnnotations {
    pub article_id: String,
    /// Per step, the token spans with POS tags.
    pub tokens: Vec<Vec<PosToken>>,
    pub frames: Vec<SrlFrame>,
    pub chains: Vec<CorefChain>,
    pub temporal: Vec<TemporalRelation>,
}

impl LingAnnotations {
    pub fn step_tokens(&self, step_index: usize) -> &[PosToken] {
        self.tokens.get(step_index).map(Vec::as_slice).unwrap_or(&[])
    }
}

// ─── wire format ────────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize, Clone)]
struct WireToken {
    s: usize,
    e: usize,
    pos: String,
}

#[derive(Serialize, Deserialize, Clone)]
struct WireArg {
    role: String,
    span: (usize, usize),
}

#[derive(Serialize, Deserialize, Clone)]
struct WireFrame {
    step: usize,
    pred: (usize, usize),
    args: Vec<WireArg>,
}

#[derive(Serialize, Deserialize, Clone)]
struct WireChain {
    step: usize,
    mentions: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize, Clone)]
struct WireEvent {
    step: usize,
    span: (usize, usize),
}

#[derive(Serialize, Deserialize, Clone)]
struct WireTemporal {
    a: WireEvent,
    b: WireEvent,
    rel: TemporalLabel,
}

#[derive(Serialize, Deserialize, Clone)]
struct WireAnnotations {
    article_id: String,
    tokens: Vec<Vec<WireToken>>,
    frames: Vec<WireFrame>,
    chains: Vec<WireChain>,
    temporal: Vec<WireTemporal>,
}

impl From<WireAnnotations> for LingAnnotations {
    fn from(w: WireAnnotations) -> Self {
        LingAnnotations {
            article_id: w.article_id,
            tokens: w
                .tokens
                .into_iter()
                .map(|step| {
                    step.into_iter()
                        .map(|t| PosToken {
                            char_start: t.s,
                            char_end: t.e,
                            pos: t.pos,
                        })
                        .collect()
                })
                .collect(),
            frames: w
                .frames
                .into_iter()
                .map(|f| SrlFrame {
                    predicate: TokenSpan::new(f.step, f.pred.0, f.pred.1),
                    args: f
                        .args
                        .into_iter()
                        .map(|a| SrlArg {
                            role: a.role,
                            span: TokenSpan::new(f.step, a.span.0, a.span.1),
                        })
                        .collect(),
                })
                .collect(),
            chains: w
                .chains
                .into_iter()
                .map(|c| CorefChain {
                    mentions: c
                        .mentions
                        .into_iter()
                        .map(|m| TokenSpan::new(c.step, m.0, m.1))
                        .collect(),
                })
                .collect(),
            temporal: w
                .temporal
                .into_iter()
                .map(|t| TemporalRelation {
                    event_a: TokenSpan::new(t.a.step, t.a.span.0, t.a.span.1),
                    event_b: TokenSpan::new(t.b.step, t.b.span.0, t.b.span.1),
                    relation: t.rel,
                })
                .collect(),
        }
    }
}

impl From<LingAnnotations> for WireAnnotations {
    fn from(a: LingAnnotations) -> Self {
        WireAnnotations {
            article_id: a.article_id,
            tokens: a
                .tokens
                .into_iter()
                .map(|step| {
                    step.into_iter()
                        .map(|t| WireToken {
                            s: t.char_start,
                            e: t.char_end,
                            pos: t.pos,
                        })
                        .collect()
                })
                .collect(),
            frames: a
                .frames
                .into_iter()
                .map(|f| WireFrame {
                    step: f.predicate.step_index,
                    pred: (f.predicate.char_start, f.predicate.char_end),
                    args: f
                        .args
                        .into_iter()
                        .map(|arg| WireArg {
                            role: arg.role,
                            span: (arg.span.char_start, arg.span.char_end),
                        })
                        .collect(),
                })
                .collect(),
            chains: a
                .chains
                .into_iter()
                .map(|c| {
                    let step = c.mentions.first().map(|m| m.step_index).unwrap_or(0);
                    WireChain {
                        step,
                        mentions: c
                            .mentions
                            .into_iter()
                            .map(|m| (m.char_start, m.char_end))
                            .collect(),
                    }
                })
                .collect(),
            temporal: a
                .temporal
                .into_iter()
                .map(|t| WireTemporal {
                    a: WireEvent {
                        step: t.event_a.step_index,
                        span: (t.event_a.char_start, t.event_a.char_end),
                    },
                    b: WireEvent {
                        step: t.event_b.step_index,
                        span: (t.event_b.char_start, t.event_b.char_end),
                    },
                    rel: t.relation,
                })
                .collect(),
        }
    }
}

// ─── provider contract ──────────────────────────────────────────────────────

/// Failure surfaced by an annotation provider.
#[derive(Debug, Clone)]
pub struct ProviderError {
    pub step: Option<usize>,
    pub message: String,
}

/// Produces raw annotations for an article. [`annotate`] validates results
/// afterwards, so providers need not re-check span bounds.
pub trait AnnotationProvider {
    fn annotate_article(&self, article: &Article) -> Result<LingAnnotations, ProviderError>;

    /// Whether the provider may be called concurrently from multiple
    /// threads. Single-threaded providers are called serially.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Run a provider over an article and validate every span it produced.
pub fn annotate(
    article: &Article,
    provider: &dyn AnnotationProvider,
) -> Result<LingAnnotations, AnnotateError> {
    let ann = provider
        .annotate_article(article)
        .map_err(|e| AnnotateError::Provider {
            context: match e.step {
                Some(s) => format!("article {}, step {s}", article.id),
                None => format!("article {}", article.id),
            },
            message: e.message,
        })?;
    validate_annotations(article, &ann)?;
    Ok(ann)
}

fn check_span(article: &Article, span: &TokenSpan) -> Result<(), AnnotateError> {
    let len = article
        .step_text(span.step_index)
        .map(text::char_len)
        .unwrap_or(0);
    if span.char_start >= span.char_end || span.char_end > len {
        return Err(AnnotateError::SpanOutOfBounds {
            article: article.id.clone(),
            step: span.step_index,
            start: span.char_start,
            end: span.char_end,
            len,
        });
    }
    Ok(())
}

fn validate_annotations(article: &Article, ann: &LingAnnotations) -> Result<(), AnnotateError> {
    if ann.article_id != article.id {
        return Err(AnnotateError::Invalid {
            article: article.id.clone(),
            message: format!("annotations carry article id {}", ann.article_id),
        });
    }
    if ann.tokens.len() != article.steps.len() {
        return Err(AnnotateError::Invalid {
            article: article.id.clone(),
            message: format!(
                "token lists for {} steps, article has {}",
                ann.tokens.len(),
                article.steps.len()
            ),
        });
    }
    for (step, toks) in ann.tokens.iter().enumerate() {
        for t in toks {
            check_span(
                article,
                &TokenSpan::new(step, t.char_start, t.char_end),
            )?;
        }
    }
    for frame in &ann.frames {
        check_span(article, &frame.predicate)?;
        for arg in &frame.args {
            check_span(article, &arg.span)?;
            if arg.span.step_index != frame.predicate.step_index {
                return Err(AnnotateError::Invalid {
                    article: article.id.clone(),
                    message: "frame argument crosses steps".into(),
                });
            }
            if arg.role.is_empty() {
                return Err(AnnotateError::Invalid {
                    article: article.id.clone(),
                    message: "empty SRL role".into(),
                });
            }
        }
    }
    for chain in &ann.chains {
        if chain.mentions.len() < 2 {
            return Err(AnnotateError::Invalid {
                article: article.id.clone(),
                message: "coref chain with fewer than 2 mentions".into(),
            });
        }
        let step = chain.mentions[0].step_index;
        for m in &chain.mentions {
            check_span(article, m)?;
            if m.step_index != step {
                return Err(AnnotateError::Invalid {
                    article: article.id.clone(),
                    message: "coref chain crosses steps".into(),
                });
            }
        }
    }
    for rel in &ann.temporal {
        check_span(article, &rel.event_a)?;
        check_span(article, &rel.event_b)?;
        if rel.event_a == rel.event_b {
            return Err(AnnotateError::Invalid {
                article: article.id.clone(),
                message: "temporal relation with identical events".into(),
            });
        }
    }
    Ok(())
}

/// Annotate a corpus, serializing calls for providers that are not safe for
/// concurrent use (the bundled pipeline is single-threaded either way).
pub fn annotate_corpus(
    articles: &[Article],
    provider: &dyn AnnotationProvider,
) -> Result<Vec<LingAnnotations>, AnnotateError> {
    let mut sorted: Vec<&Article> = articles.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    sorted.iter().map(|a| annotate(a, provider)).collect()
}

// ─── annotation file IO ─────────────────────────────────────────────────────

pub fn save_annotations(
    path: impl AsRef<Path>,
    annotations: &[LingAnnotations],
) -> Result<(), AnnotateError> {
    let path = path.as_ref();
    let mut sorted: Vec<&LingAnnotations> = annotations.iter().collect();
    sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    let mut out = fs::File::create(path).map_err(|source| AnnotateError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    for ann in sorted {
        let line = serde_json::to_string(ann).expect("annotations serialize");
        writeln!(out, "{line}").map_err(|source| AnnotateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Vec<LingAnnotations>, AnnotateError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| AnnotateError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| AnnotateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let ann: LingAnnotations =
            serde_json::from_str(&line).map_err(|source| AnnotateError::Json { line: i + 1, source })?;
        out.push(ann);
    }
    Ok(out)
}

/// Index annotations by article id.
pub fn annotations_by_id(annotations: &[LingAnnotations]) -> BTreeMap<&str, &LingAnnotations> {
    annotations
        .iter()
        .map(|a| (a.article_id.as_str(), a))
        .collect()
}

// ─── segment proposal ───────────────────────────────────────────────────────

/// One candidate segment per SRL frame: the contiguous hull over predicate
/// and arguments. Identical spans are merged; ids derive from
/// `(step_index, char_start, char_end)`.
pub fn propose_segments(ann: &LingAnnotations) -> Vec<Segment> {
    let mut spans: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for frame in &ann.frames {
        let hull = frame.hull();
        spans.insert((hull.step_index, hull.char_start, hull.char_end));
    }
    spans
        .into_iter()
        .map(|(step, start, end)| Segment {
            id: Segment::span_id(step, start, end),
            step_index: step,
            char_start: start,
            char_end: end,
            kind: SegmentKind::Actionable,
        })
        .collect()
}

// ─── noun phrases and coreference ───────────────────────────────────────────

/// An entity surface form with the span it was read from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct EntityMention {
    pub surface: String,
    pub span: TokenSpan,
}

/// Scan tokens for maximal `(DT? JJ* (NN|NNS)+)` chunks.
///
/// Returns `(surface_span_start_token, surface_span_end_token)` index pairs
/// where the surface excludes a leading determiner.
fn noun_chunks(tokens: &[PosToken]) -> Vec<(usize, usize)> {
    let mut chunks = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let mut j = i;
        if tokens[j].pos == pos::DT {
            j += 1;
        }
        let surface_start = j;
        while j < tokens.len() && tokens[j].pos == pos::JJ {
            j += 1;
        }
        let noun_start = j;
        while j < tokens.len() && (tokens[j].pos == pos::NN || tokens[j].pos == pos::NNS) {
            j += 1;
        }
        if j > noun_start {
            chunks.push((surface_start, j - 1));
            i = j;
        } else {
            i += 1;
        }
    }
    chunks
}

/// Maximal `(DT? JJ* NN+)` chunks inside the segment span, surfaces
/// lowercased with the determiner stripped.
pub fn extract_noun_phrases(
    article: &Article,
    ann: &LingAnnotations,
    segment: &Segment,
) -> BTreeSet<EntityMention> {
    let step_text = match article.step_text(segment.step_index) {
        Some(t) => t,
        None => return BTreeSet::new(),
    };
    let tokens: Vec<PosToken> = ann
        .step_tokens(segment.step_index)
        .iter()
        .filter(|t| t.char_start >= segment.char_start && t.char_end <= segment.char_end)
        .cloned()
        .collect();
    noun_chunks(&tokens)
        .into_iter()
        .map(|(first, last)| {
            let start = tokens[first].char_start;
            let end = tokens[last].char_end;
            EntityMention {
                surface: text::char_slice(step_text, start, end).to_lowercase(),
                span: TokenSpan::new(segment.step_index, start, end),
            }
        })
        .collect()
}

/// All mentions of any chain whose span overlaps the input mention's span,
/// restricted to the same step. Without a chain the singleton input is
/// returned.
pub fn resolve_corefs(
    article: &Article,
    ann: &LingAnnotations,
    mention: &EntityMention,
) -> BTreeSet<EntityMention> {
    let mut out = BTreeSet::new();
    out.insert(mention.clone());
    for chain in &ann.chains {
        if chain.mentions.iter().any(|m| m.overlaps(&mention.span)) {
            for m in &chain.mentions {
                if let Some(t) = m.text(article) {
                    out.insert(EntityMention {
                        surface: t.to_lowercase(),
                        span: *m,
                    });
                }
            }
        }
    }
    out
}

// ─── temporal consensus ─────────────────────────────────────────────────────

fn canonical_temporal(rel: &TemporalRelation) -> ((TokenSpan, TokenSpan), TemporalLabel) {
    if rel.event_a <= rel.event_b {
        ((rel.event_a, rel.event_b), rel.relation)
    } else {
        ((rel.event_b, rel.event_a), rel.relation.flipped())
    }
}

/// Per event pair, emit BEFORE (resp. AFTER) only when all runs agree on it;
/// otherwise VAGUE.
pub fn consensus_temporal(
    runs: &[Vec<TemporalRelation>],
) -> Result<Vec<TemporalRelation>, AnnotateError> {
    if runs.is_empty() {
        return Err(AnnotateError::NoRuns);
    }
    let maps: Vec<BTreeMap<(TokenSpan, TokenSpan), TemporalLabel>> = runs
        .iter()
        .map(|run| run.iter().map(canonical_temporal).collect())
        .collect();
    let keys: BTreeSet<_> = maps[0].keys().cloned().collect();
    for m in &maps[1..] {
        let other: BTreeSet<_> = m.keys().cloned().collect();
        if other != keys {
            return Err(AnnotateError::RunsMismatch);
        }
    }
    Ok(keys
        .into_iter()
        .map(|key| {
            let first = maps[0][&key];
            let unanimous = maps.iter().all(|m| m[&key] == first);
            let label = if unanimous && first != TemporalLabel::Vague {
                first
            } else {
                TemporalLabel::Vague
            };
            TemporalRelation {
                event_a: key.0,
                event_b: key.1,
                relation: label,
            }
        })
        .collect())
}

/// Look up the consensus relation for an ordered event pair, flipping stored
/// orientation when necessary. Absent pairs read as VAGUE.
pub fn relation_between(
    relations: &[TemporalRelation],
    a: &TokenSpan,
    b: &TokenSpan,
) -> TemporalLabel {
    for rel in relations {
        if rel.event_a == *a && rel.event_b == *b {
            return rel.relation;
        }
        if rel.event_a == *b && rel.event_b == *a {
            return rel.relation.flipped();
        }
    }
    TemporalLabel::Vague
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Source, Step};

    fn one_step_article(id: &str, step: &str) -> Article {
        Article {
            id: id.into(),
            source: Source::Synthetic,
            url: format!("http://fixtures/{id}"),
            goal: "Test goal.".into(),
            steps: vec![Step {
                index: 0,
                text: step.into(),
            }],
        }
    }

    #[test]
    fn annotate_heat_the_pan_yields_one_frame() {
        let article = one_step_article("a1", "Heat the pan.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        assert_eq!(ann.frames.len(), 1);
        assert_eq!(ann.frames[0].predicate.text(&article).unwrap(), "Heat");
    }

    #[test]
    fn annotate_trivial_step_has_no_frames_or_chains() {
        let article = one_step_article("a1", "Ok.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        assert!(ann.frames.is_empty());
        assert!(ann.chains.is_empty());
    }

    #[test]
    fn out_of_bounds_provider_span_rejected() {
        struct Bad;
        impl AnnotationProvider for Bad {
            fn annotate_article(&self, article: &Article) -> Result<LingAnnotations, ProviderError> {
                Ok(LingAnnotations {
                    article_id: article.id.clone(),
                    tokens: vec![vec![PosToken {
                        char_start: 0,
                        char_end: 999,
                        pos: pos::NN.into(),
                    }]],
                    frames: vec![],
                    chains: vec![],
                    temporal: vec![],
                })
            }
        }
        let article = one_step_article("a1", "Short.");
        assert!(matches!(
            annotate(&article, &Bad).unwrap_err(),
            AnnotateError::SpanOutOfBounds { .. }
        ));
    }

    #[test]
    fn propose_merges_discontinuous_args_into_hull() {
        // args at [0,4) and [10,18) in one step collapse to one segment [0,18)
        let ann = LingAnnotations {
            article_id: "a1".into(),
            tokens: vec![vec![]],
            frames: vec![SrlFrame {
                predicate: TokenSpan::new(0, 0, 4),
                args: vec![SrlArg {
                    role: "ARG1".into(),
                    span: TokenSpan::new(0, 10, 18),
                }],
            }],
            chains: vec![],
            temporal: vec![],
        };
        let segs = propose_segments(&ann);
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].char_start, segs[0].char_end), (0, 18));
        assert_eq!(segs[0].id, "s0_0_18");
    }

    #[test]
    fn propose_dedups_identical_spans_and_ignores_empty() {
        let frame = SrlFrame {
            predicate: TokenSpan::new(0, 2, 6),
            args: vec![],
        };
        let ann = LingAnnotations {
            article_id: "a1".into(),
            tokens: vec![vec![]],
            frames: vec![frame.clone(), frame],
            chains: vec![],
            temporal: vec![],
        };
        assert_eq!(propose_segments(&ann).len(), 1);
        let empty = LingAnnotations {
            article_id: "a1".into(),
            tokens: vec![vec![]],
            frames: vec![],
            chains: vec![],
            temporal: vec![],
        };
        assert!(propose_segments(&empty).is_empty());
    }

    #[test]
    fn propose_is_order_independent() {
        let f1 = SrlFrame {
            predicate: TokenSpan::new(0, 0, 4),
            args: vec![],
        };
        let f2 = SrlFrame {
            predicate: TokenSpan::new(1, 3, 9),
            args: vec![],
        };
        let make = |frames: Vec<SrlFrame>| LingAnnotations {
            article_id: "a1".into(),
            tokens: vec![vec![], vec![]],
            frames,
            chains: vec![],
            temporal: vec![],
        };
        assert_eq!(
            propose_segments(&make(vec![f1.clone(), f2.clone()])),
            propose_segments(&make(vec![f2, f1]))
        );
    }

    #[test]
    fn chunker_extracts_nouns_and_strips_determiner() {
        let article = one_step_article("a1", "place the onions in the pan");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let seg = Segment {
            id: "s0_0_28".into(),
            step_index: 0,
            char_start: 0,
            char_end: 28,
            kind: SegmentKind::Actionable,
        };
        let surfaces: BTreeSet<String> = extract_noun_phrases(&article, &ann, &seg)
            .into_iter()
            .map(|m| m.surface)
            .collect();
        assert_eq!(
            surfaces,
            BTreeSet::from(["onions".to_string(), "pan".to_string()])
        );
    }

    #[test]
    fn chunker_no_nouns() {
        let article = one_step_article("a1", "stir gently");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let seg = Segment {
            id: "s0_0_11".into(),
            step_index: 0,
            char_start: 0,
            char_end: 11,
            kind: SegmentKind::Actionable,
        };
        assert!(extract_noun_phrases(&article, &ann, &seg).is_empty());
    }

    #[test]
    fn chunker_keeps_adjectives_in_surface() {
        let article = one_step_article("a1", "the wooden board");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let seg = Segment {
            id: "s0_0_16".into(),
            step_index: 0,
            char_start: 0,
            char_end: 16,
            kind: SegmentKind::Unspecified,
        };
        let mentions = extract_noun_phrases(&article, &ann, &seg);
        assert_eq!(mentions.len(), 1);
        let m = mentions.into_iter().next().unwrap();
        assert_eq!(m.surface, "wooden board");
        assert_eq!((m.span.char_start, m.span.char_end), (4, 16));
    }

    #[test]
    fn coref_resolution_links_pronoun_to_antecedent() {
        let article = one_step_article("a1", "Slice the onions. Place them in the pan.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let them = EntityMention {
            surface: "them".into(),
            span: TokenSpan::new(0, 24, 28),
        };
        let resolved = resolve_corefs(&article, &ann, &them);
        let surfaces: BTreeSet<&str> = resolved.iter().map(|m| m.surface.as_str()).collect();
        assert!(surfaces.contains("them"));
        assert!(surfaces.contains("onions"));
    }

    #[test]
    fn coref_is_symmetric_within_chain() {
        let article = one_step_article("a1", "Slice the onions. Place them in the pan.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let them = EntityMention {
            surface: "them".into(),
            span: TokenSpan::new(0, 24, 28),
        };
        let onions = EntityMention {
            surface: "onions".into(),
            span: TokenSpan::new(0, 10, 16),
        };
        let via_them = resolve_corefs(&article, &ann, &them);
        let via_onions = resolve_corefs(&article, &ann, &onions);
        assert!(via_them.iter().any(|m| m.surface == "onions"));
        assert!(via_onions.iter().any(|m| m.surface == "them"));
    }

    #[test]
    fn unchained_mention_resolves_to_itself() {
        let article = one_step_article("a1", "Heat the pan.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let pan = EntityMention {
            surface: "pan".into(),
            span: TokenSpan::new(0, 9, 12),
        };
        assert_eq!(resolve_corefs(&article, &ann, &pan).len(), 1);
    }

    #[test]
    fn no_cross_step_coref() {
        let article = Article {
            id: "a1".into(),
            source: Source::Synthetic,
            url: "u".into(),
            goal: "g".into(),
            steps: vec![
                Step {
                    index: 0,
                    text: "Slice the onions.".into(),
                },
                Step {
                    index: 1,
                    text: "Place them in the pan.".into(),
                },
            ],
        };
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        // antecedent is in a previous step, so "them" stays unresolved
        let them = EntityMention {
            surface: "them".into(),
            span: TokenSpan::new(1, 6, 10),
        };
        assert_eq!(resolve_corefs(&article, &ann, &them).len(), 1);
    }

    fn rel(a: (usize, usize, usize), b: (usize, usize, usize), label: TemporalLabel) -> TemporalRelation {
        TemporalRelation {
            event_a: TokenSpan::new(a.0, a.1, a.2),
            event_b: TokenSpan::new(b.0, b.1, b.2),
            relation: label,
        }
    }

    #[test]
    fn consensus_unanimous_passes_through() {
        let run = vec![rel((0, 0, 4), (1, 0, 3), TemporalLabel::Before)];
        let out = consensus_temporal(&[run.clone(), run.clone(), run]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].relation, TemporalLabel::Before);
    }

    #[test]
    fn consensus_broken_yields_vague() {
        let mk = |label| vec![rel((0, 0, 4), (1, 0, 3), label)];
        let out = consensus_temporal(&[
            mk(TemporalLabel::Before),
            mk(TemporalLabel::Before),
            mk(TemporalLabel::Vague),
        ])
        .unwrap();
        assert_eq!(out[0].relation, TemporalLabel::Vague);
    }

    #[test]
    fn consensus_single_run_passthrough() {
        let run = vec![rel((0, 0, 4), (1, 0, 3), TemporalLabel::After)];
        let out = consensus_temporal(&[run]).unwrap();
        assert_eq!(out[0].relation, TemporalLabel::After);
    }

    #[test]
    fn consensus_respects_flipped_orientation() {
        // (a,b,BEFORE) and (b,a,AFTER) must agree
        let r1 = vec![rel((0, 0, 4), (1, 0, 3), TemporalLabel::Before)];
        let r2 = vec![rel((1, 0, 3), (0, 0, 4), TemporalLabel::After)];
        let out = consensus_temporal(&[r1, r2]).unwrap();
        assert_eq!(out[0].relation, TemporalLabel::Before);
    }

    #[test]
    fn consensus_rejects_mismatched_pairs() {
        let r1 = vec![rel((0, 0, 4), (1, 0, 3), TemporalLabel::Before)];
        let r2 = vec![rel((0, 0, 4), (2, 0, 3), TemporalLabel::Before)];
        assert!(matches!(
            consensus_temporal(&[r1, r2]).unwrap_err(),
            AnnotateError::RunsMismatch
        ));
        assert!(matches!(
            consensus_temporal(&[]).unwrap_err(),
            AnnotateError::NoRuns
        ));
    }

    #[test]
    fn annotation_wire_round_trip() {
        let article = one_step_article("a1", "Slice the onions. Place them in the pan.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let json = serde_json::to_string(&ann).unwrap();
        let back: LingAnnotations = serde_json::from_str(&json).unwrap();
        assert_eq!(ann, back);
        // wire schema spot-checks
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert!(v["tokens"][0][0]["s"].is_number());
        assert!(v["tokens"][0][0]["pos"].is_string());
        assert!(v["frames"][0]["pred"].is_array());
    }

    #[test]
    fn proposed_segments_are_substrings_of_steps() {
        let article = one_step_article("a1", "Heat the pan before placing the onions.");
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        for seg in propose_segments(&ann) {
            let t = seg.text(&article).expect("in bounds");
            assert!(article.steps[seg.step_index].text.contains(t));
        }
    }
}
