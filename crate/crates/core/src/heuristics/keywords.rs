//! Keyword linking: certain keywords split a sentence into two halves that
//! get linked with a direction depending on the keyword and its position.
//!
//! A keyword at the beginning of a sentence splits at the first comma;
//! anywhere else the keyword itself is the separator. Each half maps onto
//! the frame-backed segment with maximum character overlap, or is kept as a
//! new segment when no frame-backed segment overlaps.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Article, Segment, SegmentKind};
use crate::linganno::{pos, LingAnnotations, PosToken};
use crate::text;

use super::{CandidateLink, HeuristicConfig, LinkOrigin};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    LeftToRight,
    RightToLeft,
}

/// One row of the keyword table: the directions a keyword induces at the
/// sentence beginning (None when it never links there) and within a sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub keyword: String,
    pub at_beginning: Option<LinkDirection>,
    pub within: LinkDirection,
}

impl KeywordRule {
    fn new(keyword: &str, at_beginning: Option<LinkDirection>, within: LinkDirection) -> Self {
        KeywordRule {
            keyword: keyword.into(),
            at_beginning,
            within,
        }
    }
}

/// The standard keyword table.
pub fn default_keyword_table() -> Vec<KeywordRule> {
    use LinkDirection::*;
    vec![
        KeywordRule::new("before", Some(RightToLeft), LeftToRight),
        KeywordRule::new("until", Some(RightToLeft), LeftToRight),
        KeywordRule::new("in order to", Some(RightToLeft), LeftToRight),
        KeywordRule::new("so", Some(RightToLeft), LeftToRight),
        KeywordRule::new("requires", None, RightToLeft),
        KeywordRule::new("after", Some(LeftToRight), RightToLeft),
        KeywordRule::new("once", Some(LeftToRight), RightToLeft),
        KeywordRule::new("if", Some(LeftToRight), RightToLeft),
    ]
}

/// Result of keyword linking over one article.
#[derive(Debug, Clone, Default)]
pub struct KeywordOutcome {
    pub links: Vec<CandidateLink>,
    /// Halves kept as-is because no frame-backed segment overlapped them.
    pub new_segments: Vec<Segment>,
    /// Sentences where a rule matched but no link could be formed
    /// (comma-free beginning keyword, empty or unmappable halves).
    pub skipped: usize,
}

enum Half {
    Existing(String),
    Raw { start: usize, end: usize },
}

fn char_overlap(a: (usize, usize), b: (usize, usize)) -> usize {
    let lo = a.0.max(b.0);
    let hi = a.1.min(b.1);
    hi.saturating_sub(lo)
}

fn map_half(step: usize, span: (usize, usize), segments: &[Segment]) -> Half {
    let mut best: Option<(&Segment, usize)> = None;
    for seg in segments.iter().filter(|s| s.step_index == step) {
        let ov = char_overlap(span, (seg.char_start, seg.char_end));
        if ov == 0 {
            continue;
        }
        let better = match best {
            None => true,
            Some((cur, cur_ov)) => {
                let len = seg.char_end - seg.char_start;
                let cur_len = cur.char_end - cur.char_start;
                ov > cur_ov
                    || (ov == cur_ov && len < cur_len)
                    || (ov == cur_ov && len == cur_len && seg.char_start < cur.char_start)
            }
        };
        if better {
            best = Some((seg, ov));
        }
    }
    match best {
        Some((seg, _)) => Half::Existing(seg.id.clone()),
        None => Half::Raw {
            start: span.0,
            end: span.1,
        },
    }
}

/// Trim punctuation tokens from both ends of a token index range; returns the
/// character span or None when nothing is left.
fn trimmed_span(tokens: &[&PosToken], range: std::ops::Range<usize>) -> Option<(usize, usize)> {
    let mut idx: Vec<usize> = range.collect();
    while idx
        .first()
        .map(|k| tokens[*k].pos == pos::PUNCT)
        .unwrap_or(false)
    {
        idx.remove(0);
    }
    while idx
        .last()
        .map(|k| tokens[*k].pos == pos::PUNCT)
        .unwrap_or(false)
    {
        idx.pop();
    }
    if idx.is_empty() {
        return None;
    }
    Some((
        tokens[idx[0]].char_start,
        tokens[idx[idx.len() - 1]].char_end,
    ))
}

/// Apply the keyword table to every sentence of the article.
pub fn link_by_keywords(
    article: &Article,
    ann: &LingAnnotations,
    segments: &[Segment],
    config: &HeuristicConfig,
) -> KeywordOutcome {
    let mut out = KeywordOutcome::default();

    for step in &article.steps {
        let step_text = step.text.as_str();
        let step_tokens = ann.step_tokens(step.index);
        for sentence in text::split_sentences(step_text) {
            let sent: Vec<&PosToken> = step_tokens
                .iter()
                .filter(|t| t.char_start >= sentence.start && t.char_end <= sentence.end)
                .collect();
            if sent.is_empty() {
                continue;
            }
            let words: Vec<String> = sent
                .iter()
                .map(|t| text::char_slice(step_text, t.char_start, t.char_end).to_lowercase())
                .collect();

            for rule in &config.keyword_table {
                let kw: Vec<&str> = rule.keyword.split_whitespace().collect();
                let hit = (0..words.len()).find(|&i| {
                    i + kw.len() <= words.len()
                        && kw.iter().enumerate().all(|(k, w)| words[i + k] == *w)
                });
                let Some(i) = hit else { continue };
                let kw_end = i + kw.len();

                let (direction, left_span, right_span) = if i == 0 {
                    // keyword begins the sentence: split at the first comma
                    let Some(direction) = rule.at_beginning else {
                        continue;
                    };
                    let comma = (kw_end..sent.len()).find(|&k| words[k] == ",");
                    let Some(comma) = comma else {
                        out.skipped += 1;
                        continue;
                    };
                    (
                        direction,
                        trimmed_span(&sent, kw_end..comma),
                        trimmed_span(&sent, comma + 1..sent.len()),
                    )
                } else {
                    (
                        rule.within,
                        trimmed_span(&sent, 0..i),
                        trimmed_span(&sent, kw_end..sent.len()),
                    )
                };
                let (Some(left_span), Some(right_span)) = (left_span, right_span) else {
                    out.skipped += 1;
                    continue;
                };

                let left = map_half(step.index, left_span, segments);
                let right = map_half(step.index, right_span, segments);
                if let (Half::Existing(a), Half::Existing(b)) = (&left, &right) {
                    if a == b {
                        // both halves collapse onto one segment; nothing to link
                        out.skipped += 1;
                        continue;
                    }
                }

                let mut resolve = |half: Half| -> Option<String> {
                    match half {
                        Half::Existing(id) => Some(id),
                        Half::Raw { start, end } => {
                            // reuse an identical raw half; refuse partial overlaps
                            for seg in &out.new_segments {
                                if seg.step_index == step.index {
                                    if seg.char_start == start && seg.char_end == end {
                                        return Some(seg.id.clone());
                                    }
                                    if char_overlap((start, end), (seg.char_start, seg.char_end))
                                        > 0
                                    {
                                        return None;
                                    }
                                }
                            }
                            let seg = Segment {
                                id: Segment::span_id(step.index, start, end),
                                step_index: step.index,
                                char_start: start,
                                char_end: end,
                                kind: SegmentKind::Unspecified,
                            };
                            let id = seg.id.clone();
                            out.new_segments.push(seg);
                            Some(id)
                        }
                    }
                };
                let (Some(left_id), Some(right_id)) = (resolve(left), resolve(right)) else {
                    out.skipped += 1;
                    continue;
                };

                let (head, tail) = match direction {
                    LinkDirection::LeftToRight => (left_id, right_id),
                    LinkDirection::RightToLeft => (right_id, left_id),
                };
                if head == tail {
                    out.skipped += 1;
                    continue;
                }
                out.links.push(CandidateLink {
                    head,
                    tail,
                    origin: LinkOrigin::Keyword,
                    traced_entities: BTreeSet::new(),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Source, Step};
    use crate::linganno::{annotate, propose_segments, RuleProvider};

    fn run(steps: &[&str]) -> (Article, KeywordOutcome, Vec<Segment>) {
        let article = Article {
            id: "kw".into(),
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
        };
        let ann = annotate(&article, &RuleProvider::new()).unwrap();
        let segments = propose_segments(&ann);
        let outcome = link_by_keywords(&article, &ann, &segments, &HeuristicConfig::all());
        (article, outcome, segments)
    }

    fn seg_text(article: &Article, segments: &[Segment], extra: &[Segment], id: &str) -> String {
        segments
            .iter()
            .chain(extra.iter())
            .find(|s| s.id == id)
            .and_then(|s| s.text(article))
            .unwrap()
            .to_string()
    }

    #[test]
    fn before_within_sentence_links_left_to_right() {
        let (article, out, segs) = run(&["Heat the pan before placing the onions."]);
        assert_eq!(out.links.len(), 1);
        let link = &out.links[0];
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.head),
            "Heat the pan"
        );
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.tail),
            "placing the onions"
        );
        assert!(out.new_segments.is_empty());
    }

    #[test]
    fn after_at_beginning_splits_at_comma() {
        let (article, out, segs) = run(&["After the glue dries, attach the handle."]);
        assert_eq!(out.links.len(), 1);
        let link = &out.links[0];
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.head),
            "the glue dries"
        );
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.tail),
            "attach the handle"
        );
    }

    #[test]
    fn requires_links_right_to_left_with_raw_halves() {
        let (article, out, segs) = run(&["This step requires a clean surface."]);
        assert_eq!(out.links.len(), 1);
        let link = &out.links[0];
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.head),
            "a clean surface"
        );
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.tail),
            "This step"
        );
        assert_eq!(out.new_segments.len(), 2);
        assert!(out
            .new_segments
            .iter()
            .all(|s| s.kind == SegmentKind::Unspecified));
    }

    #[test]
    fn sentence_without_keyword_yields_no_links() {
        let (_, out, _) = run(&["Stir the onions in the pan."]);
        assert!(out.links.is_empty());
        assert!(out.new_segments.is_empty());
    }

    #[test]
    fn beginning_keyword_without_comma_is_skipped() {
        let (_, out, _) = run(&["After the glue dries attach the handle."]);
        // 'after' begins the sentence and there is no comma: recorded skip
        assert!(out.links.is_empty());
        assert_eq!(out.skipped, 1);
    }

    #[test]
    fn requires_at_beginning_never_links() {
        let (_, out, _) = run(&["Requires a steady hand, not speed."]);
        assert!(out.links.is_empty());
        assert_eq!(out.skipped, 0, "n/a position is not a skip");
    }

    #[test]
    fn multiword_keyword_matches_token_trigram() {
        let (article, out, segs) = run(&["Whisk the eggs in order to break the yolks."]);
        assert_eq!(out.links.len(), 1);
        let link = &out.links[0];
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.head),
            "Whisk the eggs"
        );
        assert_eq!(
            seg_text(&article, &segs, &out.new_segments, &link.tail),
            "break the yolks"
        );
    }

    #[test]
    fn keyword_matching_is_case_insensitive_on_token_boundaries() {
        // "Sooner" must not match the keyword "so"
        let (_, out, _) = run(&["Sooner starts are safer."]);
        assert!(out.links.is_empty());
    }
}
