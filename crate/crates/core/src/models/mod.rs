//! The two relation classifiers over an abstract sequence-encoder contract,
//! plus label-balanced batch construction and checkpointing.
//!
//! The encoder is a frozen feature extractor; training moves only the
//! classifier heads. The pairwise variant scores a segment pair from its
//! texts alone; the contextual variant scores every pair from
//! marker-wrapped segment vectors of the whole article.

mod checkpoint;
mod encode;
mod encoder;
mod head;
mod sampling;

pub use checkpoint::{load_model, save_model, sidecar_path, CheckpointMeta};
pub use encode::{article_text, encode_contextual, encode_pairwise};
pub use encoder::{
    EncToken, InputToken, SequenceEncoder, TinyEncoder, TinyEncoderConfig, DEFAULT_MAX_LEN,
};
pub use head::{
    classify_pair, classify_vector, index_label, label_index, Adam, ClassifierHead, HeadGrads,
    NUM_CLASSES,
};
pub use sampling::{balance_batch, positives_from_graph};

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Article, CorpusError, RelationLabel, Segment};
use crate::text;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("empty segment text")]
    EmptyText,
    #[error("encoder max input length {max} cannot fit a pair")]
    ContextTooSmall { max: usize },
    #[error("article {article}: segments {a} and {b} overlap (nesting unsupported)")]
    OverlappingSegments {
        article: String,
        a: String,
        b: String,
    },
    #[error("article {article}: segment {id} out of bounds")]
    SegmentOutOfBounds { article: String, id: String },
    #[error("article {article}: segment {id} covers no encoder tokens")]
    SegmentWithoutTokens { article: String, id: String },
    #[error(
        "article {article}: wrapped segments need {needed} positions but the max input length is {max}"
    )]
    ArticleTooLong {
        article: String,
        needed: usize,
        max: usize,
    },
    #[error("classifier head expects input dim {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("batch size must be even and positive, got {0}")]
    OddBatch(usize),
    #[error("article {0} has no positive pairs")]
    NoPositives(String),
    #[error("article {0}: could not construct a valid negative pair")]
    NegativeExhausted(String),
    #[error("unknown segment id {0}")]
    UnknownSegment(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    Pairwise,
    Contextual,
}

impl std::str::FromStr for ModelVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pairwise" => Ok(ModelVariant::Pairwise),
            "contextual" => Ok(ModelVariant::Contextual),
            other => Err(format!("unknown model variant {other:?}")),
        }
    }
}

/// An ordered segment pair with its relation label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct PairExample {
    pub article_id: String,
    pub seg_a: String,
    pub seg_b: String,
    pub label: RelationLabel,
}

/// A 3-class distribution over {NULL, PRECONDITION, POSTCONDITION}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairPrediction {
    pub probs: [f64; 3],
    pub label: RelationLabel,
}

impl PairPrediction {
    pub fn from_probs(probs: [f64; 3]) -> Self {
        let mut best = 0;
        for i in 1..3 {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        PairPrediction {
            probs,
            label: index_label(best),
        }
    }

    /// The maximum probability; the self-training confidence.
    pub fn confidence(&self) -> f64 {
        self.probs.iter().cloned().fold(0.0, f64::max)
    }
}

/// Anything that can score every ordered segment pair of an article.
/// Implemented by [`RelationModel`] and by scripted stubs in tests.
pub trait PairScorer {
    fn score_pairs(
        &self,
        article: &Article,
        segments: &[Segment],
    ) -> Result<BTreeMap<(String, String), PairPrediction>, ModelError>;
}

/// Feature vectors for every ordered segment pair of one article. The
/// encoder is frozen, so these are computed once and reused across epochs.
#[derive(Debug, Clone)]
pub struct ArticleFeatures {
    pub pair_features: BTreeMap<(String, String), Array1<f64>>,
}

impl ArticleFeatures {
    pub fn feature(&self, a: &str, b: &str) -> Result<&Array1<f64>, ModelError> {
        self.pair_features
            .get(&(a.to_string(), b.to_string()))
            .ok_or_else(|| ModelError::UnknownSegment(format!("({a}, {b})")))
    }
}

/// A relation classifier: a frozen encoder plus a trainable head.
#[derive(Debug, Clone)]
pub struct RelationModel {
    pub variant: ModelVariant,
    pub encoder: TinyEncoder,
    pub head: ClassifierHead,
    pub seed: u64,
}

pub const DEFAULT_HEAD_HIDDEN: usize = 64;

impl RelationModel {
    pub fn new(variant: ModelVariant, seed: u64) -> Self {
        RelationModel::with_encoder(variant, TinyEncoder::new(seed), DEFAULT_HEAD_HIDDEN, seed)
    }

    pub fn with_encoder(
        variant: ModelVariant,
        encoder: TinyEncoder,
        head_hidden: usize,
        seed: u64,
    ) -> Self {
        let d = encoder.hidden_size();
        let input_dim = match variant {
            ModelVariant::Pairwise => d,
            ModelVariant::Contextual => 2 * d,
        };
        let head = ClassifierHead::new(input_dim, head_hidden, text::mix_seed(&[seed, 0x4845]));
        RelationModel {
            variant,
            encoder,
            head,
            seed,
        }
    }

    /// Compute feature vectors for every ordered pair of `segments`.
    pub fn article_features(
        &self,
        article: &Article,
        segments: &[Segment],
    ) -> Result<ArticleFeatures, ModelError> {
        let mut pair_features = BTreeMap::new();
        match self.variant {
            ModelVariant::Contextual => {
                let vectors = encode_contextual(article, segments, &self.encoder)?;
                for a in segments {
                    for b in segments {
                        if a.id == b.id {
                            continue;
                        }
                        let va = &vectors[&a.id];
                        let vb = &vectors[&b.id];
                        let mut x = Array1::zeros(va.len() + vb.len());
                        for (i, v) in va.iter().chain(vb.iter()).enumerate() {
                            x[i] = *v;
                        }
                        pair_features.insert((a.id.clone(), b.id.clone()), x);
                    }
                }
            }
            ModelVariant::Pairwise => {
                for a in segments {
                    for b in segments {
                        if a.id == b.id {
                            continue;
                        }
                        let ta = a.text(article).ok_or_else(|| {
                            ModelError::SegmentOutOfBounds {
                                article: article.id.clone(),
                                id: a.id.clone(),
                            }
                        })?;
                        let tb = b.text(article).ok_or_else(|| {
                            ModelError::SegmentOutOfBounds {
                                article: article.id.clone(),
                                id: b.id.clone(),
                            }
                        })?;
                        pair_features.insert(
                            (a.id.clone(), b.id.clone()),
                            encode_pairwise(ta, tb, &self.encoder)?,
                        );
                    }
                }
            }
        }
        Ok(ArticleFeatures { pair_features })
    }

    /// Classify a precomputed feature vector.
    pub fn classify_features(&self, features: &Array1<f64>) -> Result<PairPrediction, ModelError> {
        self.head.forward(features.view())
    }

    /// Score every ordered pair of `segments`.
    pub fn predict_pairs(
        &self,
        article: &Article,
        segments: &[Segment],
    ) -> Result<BTreeMap<(String, String), PairPrediction>, ModelError> {
        let features = self.article_features(article, segments)?;
        let mut out = BTreeMap::new();
        for (pair, x) in &features.pair_features {
            out.insert(pair.clone(), self.head.forward(x.view())?);
        }
        Ok(out)
    }
}

impl PairScorer for RelationModel {
    fn score_pairs(
        &self,
        article: &Article,
        segments: &[Segment],
    ) -> Result<BTreeMap<(String, String), PairPrediction>, ModelError> {
        self.predict_pairs(article, segments)
    }
}
