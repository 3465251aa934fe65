//! Key entity tracing: segments sharing a noun-phrase entity (directly, via
//! same-step coreference, or via the optional entity predictor) get linked
//! from the narratively earlier segment to the later one.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Article, Segment};
use crate::linganno::{
    extract_noun_phrases, is_coref_pronoun, resolve_corefs, LingAnnotations, TokenSpan,
};
use crate::text;

use super::{CandidateLink, Heuristic, HeuristicConfig, LinkOrigin};

/// Lowercase, trim, and strip one leading determiner word.
pub fn normalize_surface(surface: &str) -> String {
    let lower = surface.trim().to_lowercase();
    const DETERMINERS: &[&str] = &[
        "the", "a", "an", "this", "that", "these", "those", "your", "its", "their", "his", "her",
        "our", "my", "some", "any", "each", "every", "another", "both",
    ];
    if let Some((first, rest)) = lower.split_once(' ') {
        if DETERMINERS.contains(&first) && !rest.trim().is_empty() {
            return rest.trim().to_string();
        }
    }
    lower
}

/// The entity surfaces a segment exposes for tracing: its noun phrases,
/// joined (when coref is on) with every non-pronoun mention of any chain
/// overlapping the segment. Pronoun surfaces are excluded so that two
/// unrelated "them"s never intersect.
pub fn segment_entity_set(
    article: &Article,
    ann: &LingAnnotations,
    segment: &Segment,
    use_coref: bool,
) -> BTreeSet<String> {
    let mut set: BTreeSet<String> = BTreeSet::new();
    let nps = extract_noun_phrases(article, ann, segment);
    for m in &nps {
        set.insert(normalize_surface(&m.surface));
    }
    if use_coref {
        let seg_span = TokenSpan::new(segment.step_index, segment.char_start, segment.char_end);
        // resolve every noun-phrase mention, and also pick up chains anchored
        // at a pronoun inside the segment
        let mut seeds: Vec<_> = nps.into_iter().collect();
        for chain in &ann.chains {
            if let Some(m) = chain.mentions.iter().find(|m| m.overlaps(&seg_span)) {
                if let Some(t) = m.text(article) {
                    seeds.push(crate::linganno::EntityMention {
                        surface: t.to_lowercase(),
                        span: *m,
                    });
                }
            }
        }
        for seed in seeds {
            for resolved in resolve_corefs(article, ann, &seed) {
                let norm = normalize_surface(&resolved.surface);
                if !is_coref_pronoun(&norm) {
                    set.insert(norm);
                }
            }
        }
    }
    set.retain(|s| !s.is_empty() && !is_coref_pronoun(s));
    set
}

/// Link every ordered pair of distinct segments whose entity sets intersect,
/// earlier narration first.
pub fn trace_entities(
    article: &Article,
    ann: &LingAnnotations,
    segments: &[Segment],
    config: &HeuristicConfig,
    predictor: Option<(&EntityPredictor, &EntityVocab)>,
) -> Vec<CandidateLink> {
    let use_coref = config.is_enabled(Heuristic::Coref);
    let mut ordered: Vec<&Segment> = segments.iter().collect();
    ordered.sort_by_key(|s| (s.step_index, s.char_start, s.char_end, s.id.clone()));

    let sets: Vec<BTreeSet<String>> = ordered
        .iter()
        .map(|seg| {
            let mut set = segment_entity_set(article, ann, seg, use_coref);
            if let Some((model, vocab)) = predictor {
                if let Some(t) = seg.text(article) {
                    set.extend(predict_entities(t, &article.id, model, vocab));
                }
            }
            set
        })
        .collect();

    let mut links = Vec::new();
    for i in 0..ordered.len() {
        for j in (i + 1)..ordered.len() {
            let shared: BTreeSet<String> =
                sets[i].intersection(&sets[j]).cloned().collect();
            if !shared.is_empty() {
                links.push(CandidateLink {
                    head: ordered[i].id.clone(),
                    tail: ordered[j].id.clone(),
                    origin: LinkOrigin::EntityTrace,
                    traced_entities: shared,
                });
            }
        }
    }
    links
}

// ─── entity vocabulary and predictor ────────────────────────────────────────

/// Noun-phrase surface counts per article; the global vocabulary keeps forms
/// with more than 5 occurrences in at least one article.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityVocab {
    pub entries: BTreeSet<String>,
    pub per_article_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

pub const VOCAB_MIN_OCCURRENCES: usize = 5;

impl EntityVocab {
    /// Surfaces with more than [`VOCAB_MIN_OCCURRENCES`] occurrences within
    /// one article.
    pub fn local(&self, article_id: &str) -> BTreeSet<String> {
        self.per_article_counts
            .get(article_id)
            .map(|counts| {
                counts
                    .iter()
                    .filter(|(_, c)| **c > VOCAB_MIN_OCCURRENCES)
                    .map(|(s, _)| s.clone())
                    .collect()
            })
            .unwrap_or_default()
    }
}

/// Count noun-phrase surface forms (no lemmatization) over every proposed
/// segment of every article.
pub fn build_entity_vocab(corpus: &[Article], annotations: &[LingAnnotations]) -> EntityVocab {
    let by_id = crate::linganno::annotations_by_id(annotations);
    let mut vocab = EntityVocab::default();
    for article in corpus {
        let Some(ann) = by_id.get(article.id.as_str()) else {
            continue;
        };
        let counts = vocab
            .per_article_counts
            .entry(article.id.clone())
            .or_default();
        for seg in crate::linganno::propose_segments(ann) {
            for m in extract_noun_phrases(article, ann, &seg) {
                *counts.entry(m.surface).or_insert(0) += 1;
            }
        }
    }
    for counts in vocab.per_article_counts.values() {
        for (surface, count) in counts {
            if *count > VOCAB_MIN_OCCURRENCES {
                vocab.entries.insert(surface.clone());
            }
        }
    }
    vocab
}

/// Per-segment training pairs: the segment's text labeled with every global
/// vocabulary entity appearing in the same step.
pub fn entity_training_examples(
    corpus: &[Article],
    annotations: &[LingAnnotations],
    vocab: &EntityVocab,
) -> Vec<(String, BTreeSet<String>)> {
    let by_id = crate::linganno::annotations_by_id(annotations);
    let mut examples = Vec::new();
    for article in corpus {
        let Some(ann) = by_id.get(article.id.as_str()) else {
            continue;
        };
        let segments = crate::linganno::propose_segments(ann);
        // entities per step, unioned over that step's segments
        let mut step_entities: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for seg in &segments {
            let entry = step_entities.entry(seg.step_index).or_default();
            for m in extract_noun_phrases(article, ann, seg) {
                if vocab.entries.contains(&m.surface) {
                    entry.insert(m.surface);
                }
            }
        }
        for seg in &segments {
            let Some(seg_text) = seg.text(article) else {
                continue;
            };
            let labels = step_entities
                .get(&seg.step_index)
                .cloned()
                .unwrap_or_default();
            if !labels.is_empty() {
                examples.push((seg_text.to_string(), labels));
            }
        }
    }
    examples
}

/// Multi-label bag-of-words classifier over the global entity vocabulary:
/// one logistic unit per entity, thresholded at 0.5.
#[derive(Debug, Clone)]
pub struct EntityPredictor {
    labels: Vec<String>,
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    dim: usize,
}

impl EntityPredictor {
    pub fn new(vocab: &EntityVocab, dim: usize) -> Self {
        let labels: Vec<String> = vocab.entries.iter().cloned().collect();
        let n = labels.len();
        EntityPredictor {
            labels,
            weights: vec![vec![0.0; dim]; n],
            // all-off prior: a fresh predictor asserts nothing
            bias: vec![-2.0; n],
            dim,
        }
    }

    fn features(&self, segment_text: &str) -> Vec<(usize, f64)> {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for tok in text::tokenize(segment_text) {
            let word = tok.text(segment_text).to_lowercase();
            let idx = (text::fnv1a(&word) % self.dim as u64) as usize;
            *counts.entry(idx).or_insert(0.0) += 1.0;
        }
        counts.into_iter().collect()
    }

    fn score(&self, features: &[(usize, f64)], label_idx: usize) -> f64 {
        let mut z = self.bias[label_idx];
        for (idx, v) in features {
            z += self.weights[label_idx][*idx] * v;
        }
        1.0 / (1.0 + (-z).exp())
    }

    /// Plain SGD over binary cross-entropy, one pass per epoch in example
    /// order; fully deterministic.
    pub fn train(&mut self, examples: &[(String, BTreeSet<String>)], epochs: usize, lr: f64) {
        for _ in 0..epochs {
            for (txt, labels) in examples {
                let feats = self.features(txt);
                for l in 0..self.labels.len() {
                    let y = if labels.contains(&self.labels[l]) { 1.0 } else { 0.0 };
                    let p = self.score(&feats, l);
                    let g = p - y;
                    for (idx, v) in &feats {
                        self.weights[l][*idx] -= lr * g * v;
                    }
                    self.bias[l] -= lr * g;
                }
            }
        }
    }

    /// Labels scoring above 0.5.
    pub fn predict_labels(&self, segment_text: &str) -> BTreeSet<String> {
        let feats = self.features(segment_text);
        self.labels
            .iter()
            .enumerate()
            .filter(|(l, _)| self.score(&feats, *l) > 0.5)
            .map(|(_, s)| s.clone())
            .collect()
    }
}

/// Predicted entities intersected with the article-local vocabulary.
pub fn predict_entities(
    segment_text: &str,
    article_id: &str,
    model: &EntityPredictor,
    vocab: &EntityVocab,
) -> BTreeSet<String> {
    let local = vocab.local(article_id);
    if local.is_empty() {
        return BTreeSet::new();
    }
    model
        .predict_labels(segment_text)
        .into_iter()
        .filter(|e| local.contains(e))
        .collect()
}
