//! Pairwise relation evaluation (per-label precision/recall/F1 with macro
//! and micro averages), segment alignment, Cohen's kappa, and the
//! inter-annotator agreement dictionaries.

mod ablation;

pub use ablation::{run_ablation, AblationReport, AblationRow};

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, DependencyGraph, RelationLabel, Segment};
use crate::models::PairPrediction;
use crate::text;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("no prediction matrix for article {0}")]
    MissingPrediction(String),
    #[error("article {article}: prediction segment set does not match gold")]
    SegmentSetMismatch { article: String },
    #[error("article {article}: prediction matrix incomplete ({got} of {expected} ordered pairs)")]
    IncompleteMatrix {
        article: String,
        got: usize,
        expected: usize,
    },
    #[error("annotation vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty annotation vectors")]
    EmptyVectors,
    #[error("expected agreement is 1 (both raters constant and identical); kappa undefined")]
    DegenerateAgreement,
    #[error("inter-annotator agreement needs at least two annotators, got {0}")]
    NotEnoughAnnotators(usize),
}

/// A complete labeling of every ordered segment pair of one article.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairLabelMatrix {
    pub article_id: String,
    segment_ids: BTreeSet<String>,
    labels: BTreeMap<(String, String), RelationLabel>,
}

impl PairLabelMatrix {
    /// Read a graph as a matrix: stored edges keep their label, every other
    /// ordered pair is NULL.
    pub fn from_graph(graph: &DependencyGraph) -> Self {
        let segment_ids: BTreeSet<String> =
            graph.segments.iter().map(|s| s.id.clone()).collect();
        let mut labels = BTreeMap::new();
        for u in &segment_ids {
            for v in &segment_ids {
                if u != v {
                    labels.insert((u.clone(), v.clone()), RelationLabel::Null);
                }
            }
        }
        for edge in &graph.edges {
            labels.insert((edge.head.clone(), edge.tail.clone()), edge.label);
        }
        PairLabelMatrix {
            article_id: graph.article_id.clone(),
            segment_ids,
            labels,
        }
    }

    /// Build from model predictions, requiring completeness over the
    /// ordered pairs of `segments`.
    pub fn from_predictions(
        article_id: &str,
        segments: &[Segment],
        predictions: &BTreeMap<(String, String), PairPrediction>,
    ) -> Result<Self, EvalError> {
        let segment_ids: BTreeSet<String> = segments.iter().map(|s| s.id.clone()).collect();
        let expected = segment_ids.len() * segment_ids.len().saturating_sub(1);
        let mut labels = BTreeMap::new();
        for ((u, v), pred) in predictions {
            if u != v && segment_ids.contains(u) && segment_ids.contains(v) {
                labels.insert((u.clone(), v.clone()), pred.label);
            }
        }
        if labels.len() != expected {
            return Err(EvalError::IncompleteMatrix {
                article: article_id.to_string(),
                got: labels.len(),
                expected,
            });
        }
        Ok(PairLabelMatrix {
            article_id: article_id.to_string(),
            segment_ids,
            labels,
        })
    }

    pub fn get(&self, u: &str, v: &str) -> Option<RelationLabel> {
        self.labels.get(&(u.to_string(), v.to_string())).copied()
    }

    pub fn segment_ids(&self) -> &BTreeSet<String> {
        &self.segment_ids
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(String, String), &RelationLabel)> {
        self.labels.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
}

impl Prf {
    pub fn zero() -> Self {
        Prf {
            p: 0.0,
            r: 0.0,
            f1: 0.0,
        }
    }

    fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let p = if tp + fp > 0 {
            tp as f64 / (tp + fp) as f64
        } else {
            0.0
        };
        let r = if tp + fn_ > 0 {
            tp as f64 / (tp + fn_) as f64
        } else {
            0.0
        };
        let f1 = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        Prf { p, r, f1 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub gold: usize,
    pub predicted: usize,
}

/// Per-article metrics; `None` marks a label skipped for this article (no
/// gold pairs and no predictions of that label).
#[derive(Debug, Clone, PartialEq)]
pub struct ArticleMetrics {
    pub article_id: String,
    pub pre: Option<Prf>,
    pub post: Option<Prf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelMetrics {
    pub per_article: Vec<ArticleMetrics>,
    pub macro_pre: Prf,
    pub macro_post: Prf,
    pub micro_pre: Prf,
    pub micro_post: Prf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MicroPair {
    pub pre: Prf,
    pub post: Prf,
}

/// The wire shape of a metrics report: macro pre/post plus the global micro
/// counterpart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub pre: Prf,
    pub post: Prf,
    pub micro: MicroPair,
}

impl LabelMetrics {
    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            pre: self.macro_pre,
            post: self.macro_post,
            micro: MicroPair {
                pre: self.micro_pre,
                post: self.micro_post,
            },
        }
    }

    /// Mean of the two macro condition F1s; the dev-selection scalar.
    pub fn mean_macro_f1(&self) -> f64 {
        (self.macro_pre.f1 + self.macro_post.f1) / 2.0
    }
}

/// Count TP/FP/FN for one label over one article.
pub fn count_label(
    gold: &PairLabelMatrix,
    predicted: &PairLabelMatrix,
    label: RelationLabel,
) -> LabelCounts {
    let mut c = LabelCounts::default();
    for ((u, v), gold_label) in gold.pairs() {
        let pred_label = predicted.get(u, v).unwrap_or(RelationLabel::Null);
        let g = *gold_label == label;
        let p = pred_label == label;
        if g {
            c.gold += 1;
        }
        if p {
            c.predicted += 1;
        }
        match (g, p) {
            (true, true) => c.tp += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (false, false) => {}
        }
    }
    c
}

/// Evaluate predictions against gold graphs: per-article P/R/F1 for each
/// condition label, macro-averaged across articles (skipping an article for
/// a label with no gold pairs and no predictions), plus the global micro
/// scores.
pub fn evaluate(
    gold: &[DependencyGraph],
    predicted: &[PairLabelMatrix],
) -> Result<LabelMetrics, EvalError> {
    let by_id: BTreeMap<&str, &PairLabelMatrix> = predicted
        .iter()
        .map(|m| (m.article_id.as_str(), m))
        .collect();

    let mut per_article = Vec::new();
    let mut micro = BTreeMap::from([
        (RelationLabel::Precondition, LabelCounts::default()),
        (RelationLabel::Postcondition, LabelCounts::default()),
    ]);
    let mut macro_parts: BTreeMap<RelationLabel, Vec<Prf>> = BTreeMap::from([
        (RelationLabel::Precondition, Vec::new()),
        (RelationLabel::Postcondition, Vec::new()),
    ]);

    let mut sorted: Vec<&DependencyGraph> = gold.iter().collect();
    sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));

    for graph in sorted {
        let matrix = by_id
            .get(graph.article_id.as_str())
            .ok_or_else(|| EvalError::MissingPrediction(graph.article_id.clone()))?;
        let gold_matrix = PairLabelMatrix::from_graph(graph);
        if matrix.segment_ids() != gold_matrix.segment_ids() {
            return Err(EvalError::SegmentSetMismatch {
                article: graph.article_id.clone(),
            });
        }
        let mut article = ArticleMetrics {
            article_id: graph.article_id.clone(),
            pre: None,
            post: None,
        };
        for label in [RelationLabel::Precondition, RelationLabel::Postcondition] {
            let c = count_label(&gold_matrix, matrix, label);
            let m = micro.get_mut(&label).unwrap();
            m.tp += c.tp;
            m.fp += c.fp;
            m.fn_ += c.fn_;
            if c.gold == 0 && c.predicted == 0 {
                continue; // skipped for this label
            }
            let prf = Prf::from_counts(c.tp, c.fp, c.fn_);
            macro_parts.get_mut(&label).unwrap().push(prf);
            match label {
                RelationLabel::Precondition => article.pre = Some(prf),
                RelationLabel::Postcondition => article.post = Some(prf),
                RelationLabel::Null => unreachable!(),
            }
        }
        per_article.push(article);
    }

    let mean = |parts: &[Prf]| -> Prf {
        if parts.is_empty() {
            return Prf::zero();
        }
        let n = parts.len() as f64;
        Prf {
            p: parts.iter().map(|x| x.p).sum::<f64>() / n,
            r: parts.iter().map(|x| x.r).sum::<f64>() / n,
            f1: parts.iter().map(|x| x.f1).sum::<f64>() / n,
        }
    };
    let micro_of = |label: RelationLabel| -> Prf {
        let c = micro[&label];
        Prf::from_counts(c.tp, c.fp, c.fn_)
    };

    Ok(LabelMetrics {
        macro_pre: mean(&macro_parts[&RelationLabel::Precondition]),
        macro_post: mean(&macro_parts[&RelationLabel::Postcondition]),
        micro_pre: micro_of(RelationLabel::Precondition),
        micro_post: micro_of(RelationLabel::Postcondition),
        per_article,
    })
}

// ─── segment alignment ──────────────────────────────────────────────────────

fn segment_token_set(article: &Article, seg: &Segment) -> BTreeSet<(usize, usize)> {
    let Some(step_text) = article.step_text(seg.step_index) else {
        return BTreeSet::new();
    };
    text::tokenize(step_text)
        .iter()
        .enumerate()
        .filter(|(_, t)| t.start >= seg.char_start && t.end <= seg.char_end)
        .map(|(i, _)| (seg.step_index, i))
        .collect()
}

/// Pair `(a, b)` aligns iff the shared token count strictly exceeds 60% of
/// the tokens of each segment; greedy one-to-one matching by descending
/// overlap.
pub fn align_segments(
    article: &Article,
    segs_a: &[Segment],
    segs_b: &[Segment],
) -> Vec<(usize, usize)> {
    let tokens_a: Vec<BTreeSet<(usize, usize)>> = segs_a
        .iter()
        .map(|s| segment_token_set(article, s))
        .collect();
    let tokens_b: Vec<BTreeSet<(usize, usize)>> = segs_b
        .iter()
        .map(|s| segment_token_set(article, s))
        .collect();

    let mut candidates = Vec::new();
    for (i, ta) in tokens_a.iter().enumerate() {
        for (j, tb) in tokens_b.iter().enumerate() {
            let shared = ta.intersection(tb).count();
            if shared == 0 {
                continue;
            }
            let frac_a = shared as f64 / ta.len() as f64;
            let frac_b = shared as f64 / tb.len() as f64;
            if frac_a > 0.6 && frac_b > 0.6 {
                candidates.push((shared, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut used_a = BTreeSet::new();
    let mut used_b = BTreeSet::new();
    let mut out = Vec::new();
    for (_, i, j) in candidates {
        if !used_a.contains(&i) && !used_b.contains(&j) {
            used_a.insert(i);
            used_b.insert(j);
            out.push((i, j));
        }
    }
    out.sort();
    out
}

// ─── Cohen's kappa ──────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaResult {
    pub observed: f64,
    pub expected: f64,
    pub kappa: f64,
}

/// Two-rater Cohen's kappa over binary existence vectors.
pub fn cohens_kappa(a: &[bool], b: &[bool]) -> Result<KappaResult, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(EvalError::EmptyVectors);
    }
    let n = a.len() as f64;
    let observed = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64 / n;
    let pa = a.iter().filter(|x| **x).count() as f64 / n;
    let pb = b.iter().filter(|x| **x).count() as f64 / n;
    let expected = pa * pb + (1.0 - pa) * (1.0 - pb);
    if (1.0 - expected).abs() < 1e-12 {
        return Err(EvalError::DegenerateAgreement);
    }
    Ok(KappaResult {
        observed,
        expected,
        kappa: (observed - expected) / (1.0 - expected),
    })
}

// ─── inter-annotator agreement ──────────────────────────────────────────────

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }
    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            let root = self.find(self.parent[x]);
            self.parent[x] = root;
        }
        self.parent[x]
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Transitively merged aligned segments across annotators. `membership[r][e]`
/// says whether annotator `r` has a segment in dictionary entry `e`;
/// `entry_of[r][i]` maps annotator `r`'s segment `i` to its entry.
pub struct SegmentDictionary {
    pub membership: Vec<Vec<bool>>,
    pub entry_of: Vec<Vec<usize>>,
    pub entries: usize,
}

pub fn segment_dictionary(
    article: &Article,
    annotator_segments: &[Vec<Segment>],
) -> SegmentDictionary {
    let offsets: Vec<usize> = annotator_segments
        .iter()
        .scan(0usize, |acc, segs| {
            let off = *acc;
            *acc += segs.len();
            Some(off)
        })
        .collect();
    let total: usize = annotator_segments.iter().map(Vec::len).sum();
    let mut uf = UnionFind::new(total);
    for r in 0..annotator_segments.len() {
        for s in (r + 1)..annotator_segments.len() {
            for (i, j) in align_segments(article, &annotator_segments[r], &annotator_segments[s])
            {
                uf.union(offsets[r] + i, offsets[s] + j);
            }
        }
    }
    let mut roots: Vec<usize> = (0..total).map(|x| uf.find(x)).collect();
    let mut uniq: Vec<usize> = roots.clone();
    uniq.sort_unstable();
    uniq.dedup();
    let entry_index: BTreeMap<usize, usize> =
        uniq.iter().enumerate().map(|(e, root)| (*root, e)).collect();
    for r in roots.iter_mut() {
        *r = entry_index[r];
    }

    let entries = uniq.len();
    let mut membership = vec![vec![false; entries]; annotator_segments.len()];
    let mut entry_of = Vec::with_capacity(annotator_segments.len());
    for (r, segs) in annotator_segments.iter().enumerate() {
        let mut per = Vec::with_capacity(segs.len());
        for i in 0..segs.len() {
            let e = roots[offsets[r] + i];
            membership[r][e] = true;
            per.push(e);
        }
        entry_of.push(per);
    }
    SegmentDictionary {
        membership,
        entry_of,
        entries,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IaaReport {
    /// Kappa per annotator pair `(r, s)`, r < s.
    pub segment_pairs: Vec<(usize, usize, KappaResult)>,
    pub linkage_pairs: Vec<(usize, usize, KappaResult)>,
    pub mean_segment_kappa: f64,
    pub mean_linkage_kappa: f64,
}

/// Segment and linkage agreement over one article annotated by several
/// raters. Rater pairs whose kappa is degenerate are dropped from the means.
pub fn inter_annotator_agreement(
    article: &Article,
    graphs: &[&DependencyGraph],
) -> Result<IaaReport, EvalError> {
    if graphs.len() < 2 {
        return Err(EvalError::NotEnoughAnnotators(graphs.len()));
    }
    let annotator_segments: Vec<Vec<Segment>> =
        graphs.iter().map(|g| g.segments.clone()).collect();
    let dict = segment_dictionary(article, &annotator_segments);

    // linkage dictionary over (head entry, tail entry)
    let mut linkages: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut rater_links: Vec<BTreeSet<(usize, usize)>> = Vec::new();
    for (r, graph) in graphs.iter().enumerate() {
        let index_of: BTreeMap<&str, usize> = graph
            .segments
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let mut links = BTreeSet::new();
        for edge in &graph.edges {
            if let (Some(&hi), Some(&ti)) =
                (index_of.get(edge.head.as_str()), index_of.get(edge.tail.as_str()))
            {
                let pair = (dict.entry_of[r][hi], dict.entry_of[r][ti]);
                links.insert(pair);
                linkages.insert(pair);
            }
        }
        rater_links.push(links);
    }
    let linkage_list: Vec<(usize, usize)> = linkages.into_iter().collect();

    let mut segment_pairs = Vec::new();
    let mut linkage_pairs = Vec::new();
    for r in 0..graphs.len() {
        for s in (r + 1)..graphs.len() {
            if let Ok(k) = cohens_kappa(&dict.membership[r], &dict.membership[s]) {
                segment_pairs.push((r, s, k));
            }
            if !linkage_list.is_empty() {
                let va: Vec<bool> = linkage_list
                    .iter()
                    .map(|l| rater_links[r].contains(l))
                    .collect();
                let vb: Vec<bool> = linkage_list
                    .iter()
                    .map(|l| rater_links[s].contains(l))
                    .collect();
                if let Ok(k) = cohens_kappa(&va, &vb) {
                    linkage_pairs.push((r, s, k));
                }
            }
        }
    }
    let mean = |pairs: &[(usize, usize, KappaResult)]| -> f64 {
        if pairs.is_empty() {
            0.0
        } else {
            pairs.iter().map(|(_, _, k)| k.kappa).sum::<f64>() / pairs.len() as f64
        }
    };
    Ok(IaaReport {
        mean_segment_kappa: mean(&segment_pairs),
        mean_linkage_kappa: mean(&linkage_pairs),
        segment_pairs,
        linkage_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Edge, Provenance, SegmentKind, Source, Step};

    fn seg(step: usize, start: usize, end: usize) -> Segment {
        Segment {
            id: Segment::span_id(step, start, end),
            step_index: step,
            char_start: start,
            char_end: end,
            kind: SegmentKind::Actionable,
        }
    }

    fn graph(id: &str, segments: Vec<Segment>, edges: Vec<Edge>) -> DependencyGraph {
        DependencyGraph {
            article_id: id.into(),
            provenance: Provenance::Human,
            segments,
            edges,
        }
    }

    fn edge(head: &Segment, tail: &Segment, label: RelationLabel) -> Edge {
        Edge {
            head: head.id.clone(),
            tail: tail.id.clone(),
            label,
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let s = vec![seg(0, 0, 4), seg(0, 5, 9), seg(1, 0, 4)];
        let g = graph(
            "a",
            s.clone(),
            vec![
                edge(&s[0], &s[1], RelationLabel::Precondition),
                edge(&s[1], &s[2], RelationLabel::Postcondition),
            ],
        );
        let pred = PairLabelMatrix::from_graph(&g);
        let m = evaluate(std::slice::from_ref(&g), &[pred]).unwrap();
        assert_eq!(m.macro_pre.f1, 1.0);
        assert_eq!(m.macro_post.f1, 1.0);
        assert_eq!(m.micro_pre.p, 1.0);
    }

    #[test]
    fn all_null_predictions_score_zero() {
        let s = vec![seg(0, 0, 4), seg(0, 5, 9)];
        let g = graph(
            "a",
            s.clone(),
            vec![edge(&s[0], &s[1], RelationLabel::Precondition)],
        );
        let empty = graph("a", s, vec![]);
        let pred = PairLabelMatrix::from_graph(&empty);
        let m = evaluate(std::slice::from_ref(&g), &[pred]).unwrap();
        assert_eq!(m.macro_pre.p, 0.0);
        assert_eq!(m.macro_pre.r, 0.0);
        assert_eq!(m.macro_pre.f1, 0.0);
    }

    #[test]
    fn two_thirds_fixture() {
        // 3 gold PRE pairs, model predicts 2 of them plus 1 spurious
        let s: Vec<Segment> = (0..4).map(|i| seg(0, i * 5, i * 5 + 4)).collect();
        let g = graph(
            "a",
            s.clone(),
            vec![
                edge(&s[0], &s[1], RelationLabel::Precondition),
                edge(&s[0], &s[2], RelationLabel::Precondition),
                edge(&s[0], &s[3], RelationLabel::Precondition),
            ],
        );
        let predicted = graph(
            "a",
            s.clone(),
            vec![
                edge(&s[0], &s[1], RelationLabel::Precondition),
                edge(&s[0], &s[2], RelationLabel::Precondition),
                edge(&s[1], &s[2], RelationLabel::Precondition),
            ],
        );
        let m = evaluate(
            std::slice::from_ref(&g),
            &[PairLabelMatrix::from_graph(&predicted)],
        )
        .unwrap();
        let eps = 1e-12;
        assert!((m.macro_pre.p - 2.0 / 3.0).abs() < eps);
        assert!((m.macro_pre.r - 2.0 / 3.0).abs() < eps);
        assert!((m.macro_pre.f1 - 2.0 / 3.0).abs() < eps);
    }

    #[test]
    fn segment_mismatch_is_an_error() {
        let s = vec![seg(0, 0, 4), seg(0, 5, 9)];
        let g = graph("a", s.clone(), vec![]);
        let other = graph("a", vec![seg(0, 0, 4)], vec![]);
        assert!(matches!(
            evaluate(&[g], &[PairLabelMatrix::from_graph(&other)]).unwrap_err(),
            EvalError::SegmentSetMismatch { .. }
        ));
    }

    #[test]
    fn evaluation_is_permutation_invariant_in_article_order() {
        let s1 = vec![seg(0, 0, 4), seg(0, 5, 9)];
        let s2 = vec![seg(0, 0, 4), seg(1, 0, 4)];
        let g1 = graph(
            "a",
            s1.clone(),
            vec![edge(&s1[0], &s1[1], RelationLabel::Precondition)],
        );
        let g2 = graph(
            "b",
            s2.clone(),
            vec![edge(&s2[0], &s2[1], RelationLabel::Postcondition)],
        );
        let p1 = PairLabelMatrix::from_graph(&g1);
        let p2 = PairLabelMatrix::from_graph(&g2);
        let m1 = evaluate(&[g1.clone(), g2.clone()], &[p1.clone(), p2.clone()]).unwrap();
        let m2 = evaluate(&[g2, g1], &[p2, p1]).unwrap();
        assert_eq!(m1.macro_pre, m2.macro_pre);
        assert_eq!(m1.micro_post, m2.micro_post);
    }

    fn article_with_text(text10: &str) -> Article {
        Article {
            id: "a".into(),
            source: Source::Synthetic,
            url: "u".into(),
            goal: "g".into(),
            steps: vec![Step {
                index: 0,
                text: text10.into(),
            }],
        }
    }

    #[test]
    fn identical_segments_align() {
        let article = article_with_text("one two three four five");
        let a = vec![seg(0, 0, 13)];
        let b = vec![seg(0, 0, 13)];
        assert_eq!(align_segments(&article, &a, &b), vec![(0, 0)]);
    }

    #[test]
    fn nested_segment_fails_both_sided_threshold() {
        // 10 tokens, inner segment covers 5: 100% of a but 50% of b
        let words: Vec<String> = (0..10).map(|i| format!("w{i}")).collect();
        let text = words.join(" ");
        let article = article_with_text(&text);
        let inner_end = words[..5].join(" ").len();
        let a = vec![seg(0, 0, inner_end)];
        let b = vec![seg(0, 0, text.len())];
        assert!(align_segments(&article, &a, &b).is_empty());
    }

    #[test]
    fn sixty_percent_is_strict() {
        // 5-token segments sharing exactly 3 tokens: 60% each, not aligned
        let article = article_with_text("a1 a2 a3 a4 a5 a6 a7");
        let t = &article.steps[0].text;
        let start_of = |w: &str| t.find(w).unwrap();
        let end_of = |w: &str| start_of(w) + w.len();
        let a = vec![seg(0, 0, end_of("a5"))];
        let b = vec![seg(0, start_of("a3"), end_of("a7"))];
        assert!(align_segments(&article, &a, &b).is_empty());
        // 4 of 5 shared (80%) aligns
        let c = vec![seg(0, start_of("a2"), end_of("a6"))];
        assert_eq!(align_segments(&article, &a, &c), vec![(0, 0)]);
    }

    #[test]
    fn alignment_is_symmetric() {
        let article = article_with_text("a1 a2 a3 a4 a5 a6 a7");
        let t = &article.steps[0].text;
        let start_of = |w: &str| t.find(w).unwrap();
        let end_of = |w: &str| start_of(w) + w.len();
        let a = vec![seg(0, 0, end_of("a5"))];
        let b = vec![seg(0, start_of("a2"), end_of("a6"))];
        let ab = align_segments(&article, &a, &b);
        let ba = align_segments(&article, &b, &a);
        assert_eq!(ab, vec![(0, 0)]);
        assert_eq!(ba, vec![(0, 0)]);
    }

    #[test]
    fn kappa_identical_vectors_is_one() {
        let v = [true, false, true, true];
        let k = cohens_kappa(&v, &v).unwrap();
        assert!((k.kappa - 1.0).abs() < 1e-12);
        assert_eq!(k.observed, 1.0);
    }

    #[test]
    fn kappa_half_agreement_hand_table() {
        let a = [true, true, false, false];
        let b = [true, false, true, false];
        let k = cohens_kappa(&a, &b).unwrap();
        assert!((k.observed - 0.5).abs() < 1e-12);
        assert!((k.expected - 0.5).abs() < 1e-12);
        assert!(k.kappa.abs() < 1e-12);
    }

    #[test]
    fn kappa_errors() {
        assert!(matches!(
            cohens_kappa(&[true], &[true, false]).unwrap_err(),
            EvalError::LengthMismatch(1, 2)
        ));
        assert!(matches!(
            cohens_kappa(&[], &[]).unwrap_err(),
            EvalError::EmptyVectors
        ));
        assert!(matches!(
            cohens_kappa(&[true, true], &[true, true]).unwrap_err(),
            EvalError::DegenerateAgreement
        ));
    }

    #[test]
    fn kappa_invariant_under_simultaneous_flip() {
        let a = [true, true, false, true, false, false];
        let b = [true, false, false, true, true, false];
        let k1 = cohens_kappa(&a, &b).unwrap();
        let fa: Vec<bool> = a.iter().map(|x| !x).collect();
        let fb: Vec<bool> = b.iter().map(|x| !x).collect();
        let k2 = cohens_kappa(&fa, &fb).unwrap();
        assert!((k1.kappa - k2.kappa).abs() < 1e-12);
    }

    #[test]
    fn iaa_partial_overlap_hand_computed() {
        // rater 1 marks segments A and B, rater 2 marks A and C; only A is
        // shared. Dictionary: {A}, {B}, {C}; membership (1,1,0) vs (1,0,1)
        // gives p_o=1/3, p_e=5/9, kappa=-1/2. Linkages A->B vs A->C give
        // kappa=-1.
        let text = "move the box now. lift the lid up. wipe the top off.";
        let article = article_with_text(text);
        let a = seg(0, 0, 16);
        let b = seg(0, 18, 33);
        let c = seg(0, 35, 51);
        let g1 = graph(
            "r1",
            vec![a.clone(), b.clone()],
            vec![edge(&a, &b, RelationLabel::Precondition)],
        );
        let g2 = graph(
            "r2",
            vec![a.clone(), c.clone()],
            vec![edge(&a, &c, RelationLabel::Precondition)],
        );
        let report = inter_annotator_agreement(&article, &[&g1, &g2]).unwrap();
        assert!((report.mean_segment_kappa - (-0.5)).abs() < 1e-12);
        assert!((report.mean_linkage_kappa - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn iaa_identical_annotators_have_degenerate_segment_kappa() {
        let text = "move the box now. lift the lid up.";
        let article = article_with_text(text);
        let s = vec![seg(0, 0, 16), seg(0, 18, 33)];
        let g1 = graph(
            "r1",
            s.clone(),
            vec![edge(&s[0], &s[1], RelationLabel::Precondition)],
        );
        let g2 = g1.clone();
        // all dictionary entries present for both raters: kappa undefined,
        // the pair is dropped and the mean falls back to 0
        let report = inter_annotator_agreement(&article, &[&g1, &g2]).unwrap();
        assert!(report.segment_pairs.is_empty());
        assert!(matches!(
            inter_annotator_agreement(&article, &[&g1]).unwrap_err(),
            EvalError::NotEnoughAnnotators(1)
        ));
    }
}
