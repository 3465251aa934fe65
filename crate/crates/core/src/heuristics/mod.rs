//! Weak-supervision graph construction: keyword linking, entity tracing with
//! coreference, step-distance truncation, temporal direction fixing,
//! condition labeling, and the optional entity predictor.
//!
//! The pipeline per article is
//! `propose_segments -> link_by_keywords ∪ trace_entities ->
//! apply_step_truncation -> fix_directions_with_temporal -> label_conditions`
//! and is deterministic given the config and annotations.

mod entity;
mod keywords;
mod linker;

pub use entity::{
    build_entity_vocab, entity_training_examples, normalize_surface, predict_entities,
    segment_entity_set, trace_entities, EntityPredictor, EntityVocab, VOCAB_MIN_OCCURRENCES,
};
pub use keywords::{default_keyword_table, link_by_keywords, KeywordOutcome, KeywordRule, LinkDirection};
pub use linker::{
    apply_step_truncation, fix_directions_with_temporal, is_postcondition_cue, label_conditions,
    FixOutcome,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, CorpusError, DependencyGraph, Provenance, RelationLabel};
use crate::linganno::{annotations_by_id, propose_segments, LingAnnotations};

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("invalid heuristic config: {0}")]
    InvalidConfig(String),
    #[error("unknown heuristic name: {0}")]
    UnknownHeuristic(String),
    #[error("missing annotations for article {0}")]
    MissingAnnotation(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Heuristic {
    Keywords,
    Entity,
    Coref,
    Temporal,
    PostcondRules,
}

impl Heuristic {
    pub const ALL: [Heuristic; 5] = [
        Heuristic::Keywords,
        Heuristic::Entity,
        Heuristic::Coref,
        Heuristic::Temporal,
        Heuristic::PostcondRules,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Heuristic::Keywords => "keywords",
            Heuristic::Entity => "entity",
            Heuristic::Coref => "coref",
            Heuristic::Temporal => "temporal",
            Heuristic::PostcondRules => "postcond_rules",
        }
    }

    pub fn parse(name: &str) -> Result<Heuristic, HeuristicError> {
        Heuristic::ALL
            .iter()
            .find(|h| h.name() == name.trim())
            .copied()
            .ok_or_else(|| HeuristicError::UnknownHeuristic(name.trim().to_string()))
    }
}

/// Which heuristics run, the step-distance bound S, and the keyword table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicConfig {
    pub enabled: BTreeSet<Heuristic>,
    pub max_step_distance: usize,
    #[serde(default = "default_keyword_table")]
    pub keyword_table: Vec<KeywordRule>,
}

pub const DEFAULT_MAX_STEP_DISTANCE: usize = 2;

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig::all()
    }
}

impl HeuristicConfig {
    pub fn all() -> Self {
        HeuristicConfig {
            enabled: Heuristic::ALL.into_iter().collect(),
            max_step_distance: DEFAULT_MAX_STEP_DISTANCE,
            keyword_table: default_keyword_table(),
        }
    }

    pub fn none() -> Self {
        HeuristicConfig {
            enabled: BTreeSet::new(),
            max_step_distance: DEFAULT_MAX_STEP_DISTANCE,
            keyword_table: default_keyword_table(),
        }
    }

    pub fn is_enabled(&self, h: Heuristic) -> bool {
        self.enabled.contains(&h)
    }

    /// Copy with one heuristic removed; removing entity tracing also removes
    /// coref, which cannot run without it.
    pub fn without(&self, h: Heuristic) -> Self {
        let mut out = self.clone();
        out.enabled.remove(&h);
        if h == Heuristic::Entity {
            out.enabled.remove(&Heuristic::Coref);
        }
        out
    }

    pub fn validate(&self) -> Result<(), HeuristicError> {
        if self.is_enabled(Heuristic::Coref) && !self.is_enabled(Heuristic::Entity) {
            return Err(HeuristicError::InvalidConfig(
                "coref requires entity tracing".into(),
            ));
        }
        if self.keyword_table.iter().any(|r| r.keyword.trim().is_empty()) {
            return Err(HeuristicError::InvalidConfig("empty keyword".into()));
        }
        Ok(())
    }

    /// Parse a comma-separated heuristics list, e.g.
    /// `keywords,entity,coref,temporal,postcond_rules`.
    pub fn from_list(list: &str, max_step_distance: usize) -> Result<Self, HeuristicError> {
        let mut enabled = BTreeSet::new();
        for name in list.split(',').filter(|s| !s.trim().is_empty()) {
            enabled.insert(Heuristic::parse(name)?);
        }
        let config = HeuristicConfig {
            enabled,
            max_step_distance,
            keyword_table: default_keyword_table(),
        };
        config.validate()?;
        Ok(config)
    }

    /// Parse an ablation variant: `all`, `none`, or removals from `all` such
    /// as `-temporal,-coref`.
    pub fn parse_variant(spec: &str) -> Result<Self, HeuristicError> {
        let spec = spec.trim();
        if spec == "all" {
            return Ok(HeuristicConfig::all());
        }
        if spec == "none" {
            return Ok(HeuristicConfig::none());
        }
        let mut config = HeuristicConfig::all();
        for part in spec.split(',').filter(|s| !s.trim().is_empty()) {
            let part = part.trim();
            let Some(name) = part.strip_prefix('-') else {
                return Err(HeuristicError::InvalidConfig(format!(
                    "variant piece {part:?} must start with '-' (or use 'all'/'none')"
                )));
            };
            config = config.without(Heuristic::parse(name)?);
        }
        config.validate()?;
        Ok(config)
    }

    /// Canonical name for reports: `all`, `none`, or `-h1,-h2` removals.
    pub fn variant_name(&self) -> String {
        let removed: Vec<&str> = Heuristic::ALL
            .iter()
            .filter(|h| !self.is_enabled(**h))
            .map(|h| h.name())
            .collect();
        if removed.is_empty() {
            "all".into()
        } else if removed.len() == Heuristic::ALL.len() {
            "none".into()
        } else {
            removed
                .iter()
                .map(|n| format!("-{n}"))
                .collect::<Vec<_>>()
                .join(",")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkOrigin {
    Keyword,
    EntityTrace,
}

/// A directed candidate link between two segments, before labeling.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CandidateLink {
    pub head: String,
    pub tail: String,
    pub origin: LinkOrigin,
    /// Shared surface forms for entity-trace links; empty for keyword links.
    pub traced_entities: BTreeSet<String>,
}

/// Aggregate diagnostics from a weak-supervision build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeakStats {
    pub articles: usize,
    pub segments: usize,
    pub edges: usize,
    pub precondition_edges: usize,
    pub postcondition_edges: usize,
    pub inverted_links: usize,
    pub unresolved_predicates: usize,
    pub keyword_skips: usize,
}

#[derive(Debug, Clone)]
pub struct WeakBuild {
    pub graphs: Vec<DependencyGraph>,
    pub stats: WeakStats,
}

/// Build the weak dependency graph for one article.
pub fn build_weak_graph(
    article: &Article,
    ann: &LingAnnotations,
    config: &HeuristicConfig,
    predictor: Option<(&EntityPredictor, &EntityVocab)>,
    stats: &mut WeakStats,
) -> Result<DependencyGraph, HeuristicError> {
    config.validate()?;
    let proposed = propose_segments(ann);

    let mut links: Vec<CandidateLink> = Vec::new();
    let mut segments = proposed.clone();
    if config.is_enabled(Heuristic::Keywords) {
        let outcome = link_by_keywords(article, ann, &proposed, config);
        stats.keyword_skips += outcome.skipped;
        segments.extend(outcome.new_segments);
        links.extend(outcome.links);
    }
    if config.is_enabled(Heuristic::Entity) {
        links.extend(trace_entities(article, ann, &proposed, config, predictor));
    }

    let links = apply_step_truncation(links, &segments, config);
    let links = if config.is_enabled(Heuristic::Temporal) {
        let fixed = fix_directions_with_temporal(links, ann, &segments);
        stats.inverted_links += fixed.inverted;
        stats.unresolved_predicates += fixed.unresolved;
        fixed.links
    } else {
        links
    };
    let edges = label_conditions(
        article,
        ann,
        &segments,
        &links,
        config.is_enabled(Heuristic::PostcondRules),
    );

    segments.sort_by_key(|s| (s.step_index, s.char_start, s.char_end));
    stats.articles += 1;
    stats.segments += segments.len();
    stats.edges += edges.len();
    stats.precondition_edges += edges
        .iter()
        .filter(|e| e.label == RelationLabel::Precondition)
        .count();
    stats.postcondition_edges += edges
        .iter()
        .filter(|e| e.label == RelationLabel::Postcondition)
        .count();

    let graph = DependencyGraph {
        article_id: article.id.clone(),
        provenance: Provenance::Weak,
        segments,
        edges,
    };
    graph.validate()?;
    Ok(graph)
}

/// Run the full heuristic pipeline over a corpus; deterministic for fixed
/// inputs, output sorted by article id.
pub fn build_weak_dataset(
    corpus: &[Article],
    annotations: &[LingAnnotations],
    config: &HeuristicConfig,
    predictor: Option<(&EntityPredictor, &EntityVocab)>,
) -> Result<WeakBuild, HeuristicError> {
    config.validate()?;
    let by_id = annotations_by_id(annotations);
    let mut sorted: Vec<&Article> = corpus.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut stats = WeakStats::default();
    let mut graphs = Vec::with_capacity(sorted.len());
    for article in sorted {
        let ann = by_id
            .get(article.id.as_str())
            .ok_or_else(|| HeuristicError::MissingAnnotation(article.id.clone()))?;
        graphs.push(build_weak_graph(article, ann, config, predictor, &mut stats)?);
    }
    Ok(WeakBuild { graphs, stats })
}

/// Segment-only graphs (zero edges): the augmentation base when no heuristics
/// run.
pub fn segment_only_graphs(
    corpus: &[Article],
    annotations: &[LingAnnotations],
) -> Result<Vec<DependencyGraph>, HeuristicError> {
    build_weak_dataset(corpus, annotations, &HeuristicConfig::none(), None)
        .map(|build| build.graphs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Source, Step};
    use crate::linganno::{annotate_corpus, RuleProvider};

    fn article(id: &str, steps: &[&str]) -> Article {
        Article {
            id: id.into(),
            source: Source::Synthetic,
            url: format!("u-{id}"),
            goal: "g".into(),
            steps: steps
                .iter()
                .enumerate()
                .map(|(i, t)| Step {
                    index: i,
                    text: (*t).into(),
                })
                .collect(),
        }
    }

    fn mini_corpus() -> Vec<Article> {
        vec![
            article("a1", &["Heat the pan before placing the onions.", "Stir the onions in the pan."]),
            article("a2", &["Slice the onions. Place them in the pan."]),
        ]
    }

    #[test]
    fn disabled_everything_yields_segments_but_no_edges() {
        let corpus = mini_corpus();
        let anns = annotate_corpus(&corpus, &RuleProvider::new()).unwrap();
        let build = build_weak_dataset(&corpus, &anns, &HeuristicConfig::none(), None).unwrap();
        assert_eq!(build.graphs.len(), 2);
        for g in &build.graphs {
            assert!(!g.segments.is_empty());
            assert!(g.edges.is_empty());
        }
    }

    #[test]
    fn coref_adds_exactly_the_pronoun_mediated_links() {
        let corpus = mini_corpus();
        let anns = annotate_corpus(&corpus, &RuleProvider::new()).unwrap();
        let all = build_weak_dataset(&corpus, &anns, &HeuristicConfig::all(), None).unwrap();
        let no_coref = build_weak_dataset(
            &corpus,
            &anns,
            &HeuristicConfig::all().without(Heuristic::Coref),
            None,
        )
        .unwrap();
        let edges = |b: &WeakBuild, id: &str| -> BTreeSet<crate::corpus::Edge> {
            b.graphs
                .iter()
                .find(|g| g.article_id == id)
                .unwrap()
                .edges
                .iter()
                .cloned()
                .collect()
        };
        // a1 has no pronouns: identical edge sets
        assert_eq!(edges(&all, "a1"), edges(&no_coref, "a1"));
        // a2's only link is pronoun-mediated
        let diff: BTreeSet<_> = edges(&all, "a2")
            .difference(&edges(&no_coref, "a2"))
            .cloned()
            .collect();
        assert_eq!(diff.len(), 1);
        assert!(edges(&no_coref, "a2").is_empty());
    }

    #[test]
    fn missing_annotation_errors() {
        let corpus = mini_corpus();
        let anns = annotate_corpus(&corpus[..1], &RuleProvider::new()).unwrap();
        assert!(matches!(
            build_weak_dataset(&corpus, &anns, &HeuristicConfig::all(), None).unwrap_err(),
            HeuristicError::MissingAnnotation(id) if id == "a2"
        ));
    }

    #[test]
    fn build_is_deterministic() {
        let corpus = mini_corpus();
        let anns = annotate_corpus(&corpus, &RuleProvider::new()).unwrap();
        let b1 = build_weak_dataset(&corpus, &anns, &HeuristicConfig::all(), None).unwrap();
        let b2 = build_weak_dataset(&corpus, &anns, &HeuristicConfig::all(), None).unwrap();
        let ser = |b: &WeakBuild| {
            b.graphs
                .iter()
                .map(|g| serde_json::to_string(g).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(ser(&b1), ser(&b2));
        assert_eq!(b1.stats, b2.stats);
    }

    #[test]
    fn invalid_config_rejected() {
        let mut config = HeuristicConfig::none();
        config.enabled.insert(Heuristic::Coref);
        assert!(config.validate().is_err());
        assert!(build_weak_dataset(&[], &[], &config, None).is_err());
    }

    #[test]
    fn variant_parsing_round_trips() {
        let v = HeuristicConfig::parse_variant("-temporal,-coref").unwrap();
        assert!(!v.is_enabled(Heuristic::Temporal));
        assert!(!v.is_enabled(Heuristic::Coref));
        assert!(v.is_enabled(Heuristic::Entity));
        assert_eq!(v.variant_name(), "-coref,-temporal");
        assert_eq!(
            HeuristicConfig::parse_variant("all").unwrap().variant_name(),
            "all"
        );
        assert!(HeuristicConfig::parse_variant("-bogus").is_err());
        // removing entity drags coref with it
        let v = HeuristicConfig::all().without(Heuristic::Entity);
        assert!(v.validate().is_ok());
        assert!(!v.is_enabled(Heuristic::Coref));
    }

    #[test]
    fn heuristics_list_parsing() {
        let c = HeuristicConfig::from_list("keywords,entity,coref,temporal", 2).unwrap();
        assert!(c.is_enabled(Heuristic::Keywords));
        assert!(!c.is_enabled(Heuristic::PostcondRules));
        assert!(HeuristicConfig::from_list("coref", 2).is_err());
        assert!(HeuristicConfig::from_list("bogus", 2).is_err());
    }
}
