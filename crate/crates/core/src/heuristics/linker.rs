//! Linking algorithm tail: step-distance truncation, temporal direction
//! fixing, and condition labeling.

use std::collections::{BTreeMap, BTreeSet};

use crate::corpus::{Article, Edge, RelationLabel, Segment};
use crate::linganno::{
    is_be_verb, pos, relation_between, LingAnnotations, TemporalLabel, TokenSpan,
};
use crate::text;

use super::{CandidateLink, HeuristicConfig, LinkOrigin};

/// Keep links whose endpoints are at most `max_step_distance` steps apart in
/// either direction, so a later inversion cannot create an out-of-window edge.
pub fn apply_step_truncation(
    links: Vec<CandidateLink>,
    segments: &[Segment],
    config: &HeuristicConfig,
) -> Vec<CandidateLink> {
    let step_of: BTreeMap<&str, usize> = segments
        .iter()
        .map(|s| (s.id.as_str(), s.step_index))
        .collect();
    links
        .into_iter()
        .filter(|link| {
            match (step_of.get(link.head.as_str()), step_of.get(link.tail.as_str())) {
                (Some(a), Some(b)) => a.abs_diff(*b) <= config.max_step_distance,
                _ => false,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct FixOutcome {
    pub links: Vec<CandidateLink>,
    pub inverted: usize,
    /// Entity-trace links whose segments had no predicate span; left unchanged.
    pub unresolved: usize,
}

/// Swap an entity-trace link when the consensus temporal relation of its
/// predicates is AFTER, i.e. the predicted event order is opposite to the
/// narration. Keyword links are never touched; VAGUE (or an absent pair)
/// changes nothing. `ann.temporal` is read as the consensus relations.
pub fn fix_directions_with_temporal(
    links: Vec<CandidateLink>,
    ann: &LingAnnotations,
    segments: &[Segment],
) -> FixOutcome {
    // each proposed segment is a frame hull; recover the earliest predicate
    let mut pred_of_span: BTreeMap<(usize, usize, usize), TokenSpan> = BTreeMap::new();
    for frame in &ann.frames {
        let hull = frame.hull();
        let key = (hull.step_index, hull.char_start, hull.char_end);
        let entry = pred_of_span.entry(key).or_insert(frame.predicate);
        if frame.predicate < *entry {
            *entry = frame.predicate;
        }
    }
    let seg_by_id: BTreeMap<&str, &Segment> =
        segments.iter().map(|s| (s.id.as_str(), s)).collect();
    let pred_of = |id: &str| -> Option<TokenSpan> {
        let seg = seg_by_id.get(id)?;
        pred_of_span
            .get(&(seg.step_index, seg.char_start, seg.char_end))
            .copied()
    };

    let mut out = FixOutcome::default();
    for link in links {
        if link.origin != LinkOrigin::EntityTrace {
            out.links.push(link);
            continue;
        }
        let (Some(pu), Some(pv)) = (pred_of(&link.head), pred_of(&link.tail)) else {
            out.unresolved += 1;
            out.links.push(link);
            continue;
        };
        if relation_between(&ann.temporal, &pu, &pv) == TemporalLabel::After {
            out.inverted += 1;
            out.links.push(CandidateLink {
                head: link.tail,
                tail: link.head,
                origin: link.origin,
                traced_entities: link.traced_entities,
            });
        } else {
            out.links.push(link);
        }
    }
    out
}

/// Whether the segment reads as a status description: a be-verb with a noun
/// subject before it and a progressive or participle verb form after it.
fn be_verb_cue(article: &Article, ann: &LingAnnotations, seg: &Segment) -> bool {
    let Some(step_text) = article.step_text(seg.step_index) else {
        return false;
    };
    let tokens: Vec<_> = ann
        .step_tokens(seg.step_index)
        .iter()
        .filter(|t| t.char_start >= seg.char_start && t.char_end <= seg.char_end)
        .collect();
    for (k, tok) in tokens.iter().enumerate() {
        let word = text::char_slice(step_text, tok.char_start, tok.char_end).to_lowercase();
        if !is_be_verb(&word) {
            continue;
        }
        let has_subject = tokens[..k].iter().any(|t| t.pos.starts_with(pos::NN));
        if !has_subject {
            continue;
        }
        let mut m = k + 1;
        while m < tokens.len() && tokens[m].pos == pos::RB {
            m += 1;
        }
        if m >= tokens.len() {
            continue;
        }
        let vtok = &tokens[m];
        let vword = text::char_slice(step_text, vtok.char_start, vtok.char_end).to_lowercase();
        if vtok.pos == pos::VBG
            || vtok.pos == pos::VBN
            || vword.ends_with("ing")
            || vword.ends_with("ed")
        {
            return true;
        }
    }
    false
}

/// Whether the segment sits inside an SRL argument whose role starts with
/// ARGM.
fn argm_cue(ann: &LingAnnotations, seg: &Segment) -> bool {
    let seg_span = TokenSpan::new(seg.step_index, seg.char_start, seg.char_end);
    ann.frames.iter().any(|frame| {
        frame
            .args
            .iter()
            .any(|arg| arg.role.starts_with("ARGM") && arg.span.contains(&seg_span))
    })
}

pub fn is_postcondition_cue(article: &Article, ann: &LingAnnotations, seg: &Segment) -> bool {
    be_verb_cue(article, ann, seg) || argm_cue(ann, seg)
}

/// Label every link: POSTCONDITION when the tail matches a postcondition cue
/// (and the rules are enabled), PRECONDITION otherwise. Duplicate
/// (head, tail, label) triples collapse.
pub fn label_conditions(
    article: &Article,
    ann: &LingAnnotations,
    segments: &[Segment],
    links: &[CandidateLink],
    postcond_rules: bool,
) -> Vec<Edge> {
    let seg_by_id: BTreeMap<&str, &Segment> =
        segments.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut edges = BTreeSet::new();
    for link in links {
        let Some(tail) = seg_by_id.get(link.tail.as_str()) else {
            continue;
        };
        let label = if postcond_rules && is_postcondition_cue(article, ann, tail) {
            RelationLabel::Postcondition
        } else {
            RelationLabel::Precondition
        };
        edges.insert(Edge {
            head: link.head.clone(),
            tail: link.tail.clone(),
            label,
        });
    }
    edges.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SegmentKind, Source, Step};
    use crate::linganno::{annotate, propose_segments, RuleProvider, SrlArg, SrlFrame};

    fn article(steps: &[&str]) -> Article {
        Article {
            id: "lk".into(),
            source: Source::Synthetic,
            url: "u".into(),
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

    fn seg(step: usize, start: usize, end: usize) -> Segment {
        Segment {
            id: Segment::span_id(step, start, end),
            step_index: step,
            char_start: start,
            char_end: end,
            kind: SegmentKind::Actionable,
        }
    }

    fn link(head: &Segment, tail: &Segment) -> CandidateLink {
        CandidateLink {
            head: head.id.clone(),
            tail: tail.id.clone(),
            origin: LinkOrigin::EntityTrace,
            traced_entities: BTreeSet::from(["x".to_string()]),
        }
    }

    #[test]
    fn truncation_drops_long_spans_and_keeps_same_step() {
        let segs = vec![seg(0, 0, 5), seg(0, 6, 10), seg(3, 0, 5)];
        let links = vec![link(&segs[0], &segs[2]), link(&segs[0], &segs[1])];
        let mut config = HeuristicConfig::all();
        config.max_step_distance = 2;
        let kept = apply_step_truncation(links.clone(), &segs, &config);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].tail, segs[1].id);

        config.max_step_distance = 0;
        let kept = apply_step_truncation(links.clone(), &segs, &config);
        assert_eq!(kept.len(), 1, "only the same-step link survives S=0");

        config.max_step_distance = 3;
        assert_eq!(apply_step_truncation(links, &segs, &config).len(), 2);
    }

    #[test]
    fn truncation_is_symmetric_in_direction() {
        let segs = vec![seg(0, 0, 5), seg(2, 0, 5)];
        // inverted narration order: head later than tail
        let links = vec![link(&segs[1], &segs[0])];
        let mut config = HeuristicConfig::all();
        config.max_step_distance = 2;
        assert_eq!(apply_step_truncation(links.clone(), &segs, &config).len(), 1);
        config.max_step_distance = 1;
        assert!(apply_step_truncation(links, &segs, &config).is_empty());
    }

    #[test]
    fn temporal_fix_inverts_entity_links_only() {
        let a = article(&[
            "Push down on the shovel.",
            "Pry the soil loose with the shovel first.",
        ]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = propose_segments(&ann);
        assert_eq!(segs.len(), 2);
        let entity_link = vec![link(&segs[0], &segs[1])];
        let fixed = fix_directions_with_temporal(entity_link, &ann, &segs);
        assert_eq!(fixed.inverted, 1);
        assert_eq!(fixed.links[0].head, segs[1].id);
        assert_eq!(fixed.links[0].tail, segs[0].id);

        // the same pair linked by a keyword is never inverted
        let kw_link = vec![CandidateLink {
            head: segs[0].id.clone(),
            tail: segs[1].id.clone(),
            origin: LinkOrigin::Keyword,
            traced_entities: BTreeSet::new(),
        }];
        let fixed = fix_directions_with_temporal(kw_link, &ann, &segs);
        assert_eq!(fixed.inverted, 0);
        assert_eq!(fixed.links[0].head, segs[0].id);
    }

    #[test]
    fn vague_consensus_changes_nothing() {
        let a = article(&["Push down on the shovel.", "Pry the soil loose."]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        assert!(ann.temporal.is_empty());
        let segs = propose_segments(&ann);
        let links = vec![link(&segs[0], &segs[1])];
        let fixed = fix_directions_with_temporal(links.clone(), &ann, &segs);
        assert_eq!(fixed.inverted, 0);
        assert_eq!(fixed.links, links);
    }

    #[test]
    fn temporal_fix_applied_twice_equals_once() {
        let a = article(&[
            "Push down on the shovel.",
            "Pry the soil loose with the shovel first.",
        ]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = propose_segments(&ann);
        let once = fix_directions_with_temporal(vec![link(&segs[0], &segs[1])], &ann, &segs);
        let twice = fix_directions_with_temporal(once.links.clone(), &ann, &segs);
        assert_eq!(once.links, twice.links);
        assert_eq!(twice.inverted, 0);
    }

    #[test]
    fn link_without_predicate_is_unchanged_and_counted() {
        let a = article(&["Push down on the shovel. Extra words here."]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = vec![seg(0, 0, 4), seg(0, 30, 35)];
        let links = vec![link(&segs[1], &segs[0])];
        let fixed = fix_directions_with_temporal(links.clone(), &ann, &segs);
        assert_eq!(fixed.unresolved, 1);
        assert_eq!(fixed.links, links);
    }

    #[test]
    fn be_verb_progressive_tail_labels_postcondition() {
        let a = article(&["Stir until the oil is sizzling."]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = propose_segments(&ann);
        let stir = segs.iter().find(|s| s.text(&a).unwrap() == "Stir").unwrap();
        let oil = segs
            .iter()
            .find(|s| s.text(&a).unwrap() == "the oil is sizzling")
            .unwrap();
        let links = vec![CandidateLink {
            head: stir.id.clone(),
            tail: oil.id.clone(),
            origin: LinkOrigin::Keyword,
            traced_entities: BTreeSet::new(),
        }];
        let edges = label_conditions(&a, &ann, &segs, &links, true);
        assert_eq!(edges[0].label, RelationLabel::Postcondition);
        // with the rules disabled everything is a precondition
        let edges = label_conditions(&a, &ann, &segs, &links, false);
        assert_eq!(edges[0].label, RelationLabel::Precondition);
    }

    #[test]
    fn imperative_tail_labels_precondition() {
        let a = article(&["Heat the pan.", "Stir the onions."]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = propose_segments(&ann);
        let links = vec![link(&segs[0], &segs[1])];
        let edges = label_conditions(&a, &ann, &segs, &links, true);
        assert_eq!(edges[0].label, RelationLabel::Precondition);
    }

    #[test]
    fn argm_role_tail_labels_postcondition() {
        // hand-built annotations: the tail segment coincides with an ARGM-PRD arg
        let a = article(&["Paint the wall red."]);
        let tail = seg(0, 15, 18);
        let head = seg(0, 0, 14);
        let ann = LingAnnotations {
            article_id: "lk".into(),
            tokens: vec![vec![]],
            frames: vec![SrlFrame {
                predicate: crate::linganno::TokenSpan::new(0, 0, 5),
                args: vec![SrlArg {
                    role: "ARGM-PRD".into(),
                    span: crate::linganno::TokenSpan::new(0, 15, 18),
                }],
            }],
            chains: vec![],
            temporal: vec![],
        };
        let segs = vec![head.clone(), tail.clone()];
        let links = vec![link(&head, &tail)];
        let edges = label_conditions(&a, &ann, &segs, &links, true);
        assert_eq!(edges[0].label, RelationLabel::Postcondition);
    }

    #[test]
    fn duplicate_labeled_links_collapse() {
        let a = article(&["Heat the pan.", "Stir the onions."]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = propose_segments(&ann);
        let l = link(&segs[0], &segs[1]);
        let kw = CandidateLink {
            origin: LinkOrigin::Keyword,
            traced_entities: BTreeSet::new(),
            ..l.clone()
        };
        let edges = label_conditions(&a, &ann, &segs, &[l, kw], true);
        assert_eq!(edges.len(), 1);
    }

    #[test]
    fn will_be_frozen_matches_participle_cue() {
        let a = article(&["Wait until the sauce is frozen."]);
        let ann = annotate(&a, &RuleProvider::new()).unwrap();
        let segs = propose_segments(&ann);
        let frozen = segs
            .iter()
            .find(|s| s.text(&a).unwrap() == "the sauce is frozen")
            .unwrap();
        assert!(is_postcondition_cue(&a, &ann, frozen));
    }
}
