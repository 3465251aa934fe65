//! Input construction for the two model variants.
//!
//! Pairwise: `[CLS] tokens(a) [SEP] tokens(b)`, prediction read at the CLS
//! position. Contextual: the whole article with segment-marker tokens
//! wrapped around each segment, a segment vector being the mean of its token
//! outputs (markers excluded).

use std::collections::BTreeMap;

use ndarray::Array1;

use crate::corpus::{Article, Segment};
use crate::text;

use super::encoder::{mean_rows, InputToken, SequenceEncoder};
use super::ModelError;

/// Encode an ordered segment-text pair, returning the CLS output vector.
///
/// When the combined length exceeds L, `seg_b_text` is truncated from the
/// right (never below one token); `seg_a_text` is truncated only if the
/// input still does not fit.
pub fn encode_pairwise(
    seg_a_text: &str,
    seg_b_text: &str,
    encoder: &dyn SequenceEncoder,
) -> Result<Array1<f64>, ModelError> {
    let tokens_a = encoder.tokenize(seg_a_text);
    let tokens_b = encoder.tokenize(seg_b_text);
    if tokens_a.is_empty() || tokens_b.is_empty() {
        return Err(ModelError::EmptyText);
    }
    let max = encoder.max_input_len();
    if max < 4 {
        return Err(ModelError::ContextTooSmall { max });
    }
    let mut keep_a = tokens_a.len();
    let budget_b = max.saturating_sub(2 + keep_a).max(1);
    let keep_b = tokens_b.len().min(budget_b);
    if 2 + keep_a + keep_b > max {
        keep_a = max - 2 - keep_b;
    }

    let mut input = Vec::with_capacity(2 + keep_a + keep_b);
    input.push(InputToken::Cls);
    input.extend(
        tokens_a[..keep_a]
            .iter()
            .map(|t| InputToken::Word(t.text.clone())),
    );
    input.push(InputToken::Sep);
    input.extend(
        tokens_b[..keep_b]
            .iter()
            .map(|t| InputToken::Word(t.text.clone())),
    );
    let output = encoder.encode(&input);
    Ok(output.row(0).to_owned())
}

/// The article linearization the contextual model consumes: the goal,
/// followed by the step texts joined with single spaces.
pub fn article_text(article: &Article) -> (String, Vec<usize>) {
    let mut text_out = article.goal.clone();
    let mut cursor = text::char_len(&article.goal);
    let mut offsets = Vec::with_capacity(article.steps.len());
    for step in &article.steps {
        text_out.push(' ');
        cursor += 1;
        offsets.push(cursor);
        text_out.push_str(&step.text);
        cursor += text::char_len(&step.text);
    }
    (text_out, offsets)
}

/// Encode every segment of an article in context: wrap each segment's tokens
/// in segment markers and mean-pool its token outputs.
///
/// Truncation at L must preserve all wrapped segments completely; otherwise
/// the article is rejected. Overlapping segment spans are rejected (nesting
/// unsupported).
pub fn encode_contextual(
    article: &Article,
    segments: &[Segment],
    encoder: &dyn SequenceEncoder,
) -> Result<BTreeMap<String, Array1<f64>>, ModelError> {
    if segments.is_empty() {
        return Ok(BTreeMap::new());
    }
    let (full_text, step_offsets) = article_text(article);

    // map segments to article-level character spans
    let mut spans: Vec<(usize, usize, &Segment)> = Vec::with_capacity(segments.len());
    for seg in segments {
        if seg.text(article).is_none() {
            return Err(ModelError::SegmentOutOfBounds {
                article: article.id.clone(),
                id: seg.id.clone(),
            });
        }
        let base = step_offsets[seg.step_index];
        spans.push((base + seg.char_start, base + seg.char_end, seg));
    }
    spans.sort_by_key(|(start, end, seg)| (*start, *end, seg.id.clone()));
    for pair in spans.windows(2) {
        if pair[1].0 < pair[0].1 {
            return Err(ModelError::OverlappingSegments {
                article: article.id.clone(),
                a: pair[0].2.id.clone(),
                b: pair[1].2.id.clone(),
            });
        }
    }

    let tokens = encoder.tokenize(&full_text);
    // token index range per segment: tokens fully inside the span
    let mut ranges: Vec<(usize, usize)> = Vec::with_capacity(spans.len());
    let mut cursor = 0usize;
    for (start, end, seg) in &spans {
        while cursor < tokens.len() && tokens[cursor].char_start < *start {
            cursor += 1;
        }
        let first = cursor;
        let mut last = first;
        while last < tokens.len() && tokens[last].char_end <= *end {
            last += 1;
        }
        if last == first {
            return Err(ModelError::SegmentWithoutTokens {
                article: article.id.clone(),
                id: seg.id.clone(),
            });
        }
        ranges.push((first, last));
        cursor = last;
    }

    // interleave marker tokens with the word stream
    let mut input = Vec::with_capacity(tokens.len() + 2 * spans.len());
    let mut positions: Vec<Vec<usize>> = vec![Vec::new(); spans.len()];
    let mut seg_cursor = 0usize;
    let mut last_close = 0usize;
    for (i, token) in tokens.iter().enumerate() {
        if seg_cursor < ranges.len() && i == ranges[seg_cursor].0 {
            input.push(InputToken::SegOpen);
        }
        input.push(InputToken::Word(token.text.clone()));
        if seg_cursor < ranges.len() && i >= ranges[seg_cursor].0 && i < ranges[seg_cursor].1 {
            positions[seg_cursor].push(input.len() - 1);
        }
        if seg_cursor < ranges.len() && i + 1 == ranges[seg_cursor].1 {
            input.push(InputToken::SegClose);
            last_close = input.len() - 1;
            seg_cursor += 1;
        }
    }

    let max = encoder.max_input_len();
    if input.len() > max {
        if last_close >= max {
            return Err(ModelError::ArticleTooLong {
                article: article.id.clone(),
                needed: last_close + 1,
                max,
            });
        }
        input.truncate(max);
    }

    let output = encoder.encode(&input);
    let mut vectors = BTreeMap::new();
    for (k, (_, _, seg)) in spans.iter().enumerate() {
        vectors.insert(seg.id.clone(), mean_rows(&output, &positions[k]));
    }
    Ok(vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{SegmentKind, Source, Step};
    use crate::models::encoder::{EncToken, TinyEncoder, TinyEncoderConfig};
    use ndarray::Array2;

    fn article(goal: &str, steps: &[&str]) -> Article {
        Article {
            id: "m".into(),
            source: Source::Synthetic,
            url: "u".into(),
            goal: goal.into(),
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

    #[test]
    fn pairwise_vector_has_hidden_size() {
        let enc = TinyEncoder::new(11);
        let v = encode_pairwise("heat the pan", "stir the onions", &enc).unwrap();
        assert_eq!(v.len(), 64);
    }

    #[test]
    fn pairwise_order_is_encoded() {
        let enc = TinyEncoder::new(11);
        let ab = encode_pairwise("heat the pan", "stir the onions", &enc).unwrap();
        let ba = encode_pairwise("stir the onions", "heat the pan", &enc).unwrap();
        assert_ne!(ab, ba);
    }

    #[test]
    fn pairwise_deterministic() {
        let enc = TinyEncoder::new(11);
        let a = encode_pairwise("heat the pan", "stir", &enc).unwrap();
        let b = encode_pairwise("heat the pan", "stir", &enc).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pairwise_truncates_b_from_the_right() {
        let config = TinyEncoderConfig {
            max_len: 10,
            ..TinyEncoderConfig::with_seed(1)
        };
        let enc = TinyEncoder::with_config(config);
        let long_b = vec!["word"; 50].join(" ");
        let v = encode_pairwise("short text here", &long_b, &enc).unwrap();
        assert_eq!(v.len(), 64);
        // b reduced to one token even when a is long
        let long_a = vec!["word"; 50].join(" ");
        let v = encode_pairwise(&long_a, &long_b, &enc).unwrap();
        assert_eq!(v.len(), 64);
    }

    #[test]
    fn pairwise_rejects_empty_text() {
        let enc = TinyEncoder::new(11);
        assert!(matches!(
            encode_pairwise("", "stir", &enc).unwrap_err(),
            ModelError::EmptyText
        ));
    }

    #[test]
    fn contextual_yields_one_vector_per_segment() {
        let enc = TinyEncoder::new(11);
        let a = article("Fry onions.", &["Heat the pan.", "Stir the onions."]);
        let segs = vec![seg(0, 0, 12), seg(1, 0, 15)];
        let vecs = encode_contextual(&a, &segs, &enc).unwrap();
        assert_eq!(vecs.len(), 2);
        for v in vecs.values() {
            assert_eq!(v.len(), 64);
        }
    }

    /// Stub whose outputs are a constant vector, for pooling checks.
    struct ConstEncoder {
        value: f64,
        max_len: usize,
    }

    impl SequenceEncoder for ConstEncoder {
        fn encoder_id(&self) -> String {
            "const".into()
        }
        fn hidden_size(&self) -> usize {
            4
        }
        fn max_input_len(&self) -> usize {
            self.max_len
        }
        fn tokenize(&self, source: &str) -> Vec<EncToken> {
            crate::text::tokenize(source)
                .into_iter()
                .map(|t| EncToken {
                    text: t.text(source).to_string(),
                    char_start: t.start,
                    char_end: t.end,
                })
                .collect()
        }
        fn encode(&self, input: &[InputToken]) -> Array2<f64> {
            Array2::from_elem((input.len(), 4), self.value)
        }
    }

    #[test]
    fn constant_encoder_means_to_the_constant() {
        let enc = ConstEncoder {
            value: 3.25,
            max_len: 500,
        };
        let a = article("Fry onions.", &["Heat the pan now."]);
        let segs = vec![seg(0, 0, 12)];
        let vecs = encode_contextual(&a, &segs, &enc).unwrap();
        let v = &vecs[&segs[0].id];
        assert!(v.iter().all(|x| (*x - 3.25).abs() < 1e-12));
    }

    #[test]
    fn mean_pooling_is_linear_in_token_outputs() {
        let small = ConstEncoder {
            value: 1.5,
            max_len: 500,
        };
        let scaled = ConstEncoder {
            value: 4.5,
            max_len: 500,
        };
        let a = article("Fry onions.", &["Heat the pan now."]);
        let segs = vec![seg(0, 0, 12)];
        let v1 = encode_contextual(&a, &segs, &small).unwrap();
        let v3 = encode_contextual(&a, &segs, &scaled).unwrap();
        for (x, y) in v1[&segs[0].id].iter().zip(v3[&segs[0].id].iter()) {
            assert!((y - 3.0 * x).abs() < 1e-12);
        }
    }

    #[test]
    fn single_token_segment_equals_its_token_output() {
        // with the tiny encoder, a one-token segment's mean is that row
        let enc = TinyEncoder::new(5);
        let a = article("Goal.", &["Stir now."]);
        let segs = vec![seg(0, 0, 4)];
        let vecs = encode_contextual(&a, &segs, &enc).unwrap();
        assert_eq!(vecs[&segs[0].id].len(), 64);
        // the marker-wrapped stream is [.., <a>, stir, </a>, ..]; recompute
        let (full, _) = article_text(&a);
        let toks = enc.tokenize(&full);
        let stir_pos = toks.iter().position(|t| t.text == "Stir").unwrap();
        let mut input: Vec<InputToken> = Vec::new();
        for (i, t) in toks.iter().enumerate() {
            if i == stir_pos {
                input.push(InputToken::SegOpen);
            }
            input.push(InputToken::Word(t.text.clone()));
            if i == stir_pos {
                input.push(InputToken::SegClose);
            }
        }
        let out = enc.encode(&input);
        let expected = out.row(stir_pos + 1);
        for (x, y) in vecs[&segs[0].id].iter().zip(expected.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn overlapping_segments_rejected() {
        let enc = TinyEncoder::new(5);
        let a = article("Goal.", &["Heat the pan slowly."]);
        let segs = vec![seg(0, 0, 12), seg(0, 9, 19)];
        assert!(matches!(
            encode_contextual(&a, &segs, &enc).unwrap_err(),
            ModelError::OverlappingSegments { .. }
        ));
    }

    #[test]
    fn unpreservable_article_rejected_with_diagnostic() {
        let config = TinyEncoderConfig {
            max_len: 12,
            ..TinyEncoderConfig::with_seed(1)
        };
        let enc = TinyEncoder::with_config(config);
        let long_step = vec!["filler"; 30].join(" ") + " target words";
        let a = article("Goal.", &[long_step.as_str()]);
        let start = long_step.find("target").unwrap();
        let segs = vec![seg(0, start, long_step.len())];
        match encode_contextual(&a, &segs, &enc).unwrap_err() {
            ModelError::ArticleTooLong { needed, max, .. } => {
                assert!(needed > max);
            }
            other => panic!("expected ArticleTooLong, got {other}"),
        }
    }

    #[test]
    fn trailing_text_after_last_segment_may_be_cut() {
        let config = TinyEncoderConfig {
            max_len: 8,
            ..TinyEncoderConfig::with_seed(1)
        };
        let enc = TinyEncoder::with_config(config);
        let a = article("Go.", &["Stir now plus lots of trailing words here."]);
        let segs = vec![seg(0, 0, 4)];
        let vecs = encode_contextual(&a, &segs, &enc).unwrap();
        assert_eq!(vecs.len(), 1);
    }
}
