//! condgraph extracts action-precondition-postcondition dependency graphs
//! from multi-step instructional manuals.
//!
//! The pipeline builds large weakly-supervised training graphs with linking
//! heuristics (keywords, entity tracing with coreference, step-distance
//! truncation, temporal direction fixing, condition labeling), trains
//! pairwise and contextualized relation classifiers over segment pairs under
//! a staged finetune + self-training regimen, and evaluates against densely
//! annotated gold graphs.

pub mod corpus;
pub mod heuristics;
pub mod linganno;
pub mod text;

pub use corpus::{
    Article, CorpusError, DependencyGraph, Edge, Provenance, RelationLabel, Segment, SegmentKind,
    Source, SplitSpec, Step,
};
