//! Label-balanced batch construction: half positives, half constructed
//! negatives (inverted positives or same-article replacements with no gold
//! relation).

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{DependencyGraph, RelationLabel};

use super::{ModelError, PairExample};

/// Positive examples read off a graph's edges.
pub fn positives_from_graph(graph: &DependencyGraph) -> Vec<PairExample> {
    graph
        .edges
        .iter()
        .map(|e| PairExample {
            article_id: graph.article_id.clone(),
            seg_a: e.head.clone(),
            seg_b: e.tail.clone(),
            label: e.label,
        })
        .collect()
}

/// Build one balanced batch: exactly `batch_size / 2` positives sampled from
/// the non-NULL pairs (with replacement when there are too few), and
/// `batch_size / 2` negatives, each either an inverted positive (label NULL,
/// valid only when the swapped pair has no gold edge) or a positive with one
/// segment replaced by a random same-article segment having no relation to
/// the kept one. Deterministic under the seed.
pub fn balance_batch(
    positives: &[PairExample],
    graph: &DependencyGraph,
    batch_size: usize,
    seed: u64,
) -> Result<Vec<PairExample>, ModelError> {
    if batch_size == 0 || batch_size % 2 != 0 {
        return Err(ModelError::OddBatch(batch_size));
    }
    if positives.is_empty() {
        return Err(ModelError::NoPositives(graph.article_id.clone()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = batch_size / 2;

    let edge_pairs: BTreeSet<(&str, &str)> = graph
        .edges
        .iter()
        .map(|e| (e.head.as_str(), e.tail.as_str()))
        .collect();
    let has_edge = |a: &str, b: &str| edge_pairs.contains(&(a, b));
    let related = |a: &str, b: &str| has_edge(a, b) || has_edge(b, a);
    let segment_ids: Vec<&str> = graph.segments.iter().map(|s| s.id.as_str()).collect();

    let mut batch: Vec<PairExample> = if positives.len() >= half {
        sample(&mut rng, positives.len(), half)
            .into_iter()
            .map(|i| positives[i].clone())
            .collect()
    } else {
        (0..half)
            .map(|_| positives[rng.random_range(0..positives.len())].clone())
            .collect()
    };

    for _ in 0..half {
        let mut found = None;
        for _attempt in 0..200 {
            let p = &positives[rng.random_range(0..positives.len())];
            if rng.random_bool(0.5) {
                // invert the positive pair
                if !has_edge(&p.seg_b, &p.seg_a) {
                    found = Some(PairExample {
                        article_id: p.article_id.clone(),
                        seg_a: p.seg_b.clone(),
                        seg_b: p.seg_a.clone(),
                        label: RelationLabel::Null,
                    });
                    break;
                }
            } else if segment_ids.len() >= 2 {
                // replace one endpoint with an unrelated same-article segment
                let replacement = segment_ids[rng.random_range(0..segment_ids.len())];
                let (kept, pair) = if rng.random_bool(0.5) {
                    (p.seg_a.as_str(), (p.seg_a.clone(), replacement.to_string()))
                } else {
                    (p.seg_b.as_str(), (replacement.to_string(), p.seg_b.clone()))
                };
                if replacement != kept && !related(replacement, kept) {
                    found = Some(PairExample {
                        article_id: p.article_id.clone(),
                        seg_a: pair.0,
                        seg_b: pair.1,
                        label: RelationLabel::Null,
                    });
                    break;
                }
            }
        }
        match found {
            Some(example) => batch.push(example),
            None => return Err(ModelError::NegativeExhausted(graph.article_id.clone())),
        }
    }
    Ok(batch)
}
