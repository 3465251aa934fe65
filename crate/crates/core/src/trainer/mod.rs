//! Multi-staged training orchestration: weak-supervision pretraining,
//! annotated finetuning, self-training augmentation, and dev-based
//! checkpoint selection.

use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    Article, DependencyGraph, Edge, Provenance, RelationLabel, SplitSpec,
};
use crate::evalkit::{evaluate, EvalError, LabelMetrics, PairLabelMatrix, Prf};
use crate::heuristics::{
    build_weak_dataset, segment_only_graphs, HeuristicConfig, HeuristicError,
};
use crate::linganno::LingAnnotations;
use crate::models::{
    balance_batch, label_index, positives_from_graph, Adam, ArticleFeatures, ClassifierHead,
    ModelError, ModelVariant, PairExample, PairScorer, RelationModel,
};
use crate::text;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid stage config: {0}")]
    InvalidConfig(String),
    #[error("no training graphs for stage {0}")]
    EmptyTraining(String),
    #[error("stage {stage} expects provenance {expected:?} but graph {article} is {got:?}")]
    ProvenanceMismatch {
        stage: String,
        article: String,
        expected: Provenance,
        got: Provenance,
    },
    #[error("loss became NaN at epoch {0}; aborting")]
    NanLoss(usize),
    #[error("stage order violation: {0}")]
    StageOrder(String),
    #[error("article {0} referenced by a graph is missing from the corpus")]
    MissingArticle(String),
    #[error("confidence threshold must be in (0, 1], got {0}")]
    BadThreshold(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Heuristic(#[from] HeuristicError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageKind {
    Weak,
    Finetune,
    SelftrainRebuild,
    SelftrainFinetune,
}

impl StageKind {
    pub fn name(&self) -> &'static str {
        match self {
            StageKind::Weak => "weak",
            StageKind::Finetune => "finetune",
            StageKind::SelftrainRebuild => "selftrain_rebuild",
            StageKind::SelftrainFinetune => "selftrain_finetune",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub stage: StageKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Training graphs must carry this provenance.
    pub provenance: Provenance,
}

impl StageConfig {
    pub fn new(stage: StageKind, provenance: Provenance) -> Self {
        StageConfig {
            stage,
            epochs: 10,
            batch_size: 8,
            learning_rate: 0.01,
            seed: 13,
            provenance,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 || self.batch_size % 2 != 0 {
            return Err(TrainError::InvalidConfig(format!(
                "batch size must be even and positive, got {}",
                self.batch_size
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(TrainError::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainConfig {
    pub confidence_threshold: f64,
    pub override_conflicts: bool,
}

impl Default for SelfTrainConfig {
    fn default() -> Self {
        SelfTrainConfig {
            confidence_threshold: 0.9,
            override_conflicts: true,
        }
    }
}

impl SelfTrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let t = self.confidence_threshold;
        if !(t > 0.0 && t <= 1.0) {
            return Err(TrainError::BadThreshold(t));
        }
        Ok(())
    }
}

/// Dev metrics snapshot: macro P/R/F1 for each condition label plus their
/// mean F1, the checkpoint-selection scalar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DevSummary {
    pub pre: Prf,
    pub post: Prf,
    pub mean_f1: f64,
}

impl DevSummary {
    pub fn from_metrics(m: &LabelMetrics) -> Self {
        DevSummary {
            pre: m.macro_pre,
            post: m.macro_post,
            mean_f1: m.mean_macro_f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub dev: DevSummary,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageOutcome {
    pub name: String,
    pub epochs: usize,
    pub best_epoch: usize,
    pub dev: DevSummary,
    pub per_epoch: Vec<EpochRecord>,
    /// Articles skipped with a diagnostic (unencodable or without positives).
    pub skipped_articles: Vec<String>,
}

struct TrainableArticle {
    graph: DependencyGraph,
    positives: Vec<PairExample>,
    features: ArticleFeatures,
}

fn index_articles(corpus: &[Article]) -> BTreeMap<&str, &Article> {
    corpus.iter().map(|a| (a.id.as_str(), a)).collect()
}

/// Cross-entropy training over balanced batches with per-epoch dev
/// evaluation; returns the checkpoint with the best dev macro-F1 (mean of
/// the two condition F1s) restored into `model`.
pub fn train_stage(
    model: &mut RelationModel,
    graphs: &[DependencyGraph],
    corpus: &[Article],
    dev_graphs: &[DependencyGraph],
    config: &StageConfig,
) -> Result<StageOutcome, TrainError> {
    config.validate()?;
    let stage_name = config.stage.name().to_string();
    if graphs.is_empty() {
        return Err(TrainError::EmptyTraining(stage_name));
    }
    for g in graphs {
        if g.provenance != config.provenance {
            return Err(TrainError::ProvenanceMismatch {
                stage: stage_name,
                article: g.article_id.clone(),
                expected: config.provenance,
                got: g.provenance,
            });
        }
    }
    let by_id = index_articles(corpus);
    let mut skipped = Vec::new();

    // frozen encoder: features computed once per article
    let mut train: Vec<TrainableArticle> = Vec::new();
    let mut sorted: Vec<&DependencyGraph> = graphs.iter().collect();
    sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    for graph in sorted {
        let article = by_id
            .get(graph.article_id.as_str())
            .ok_or_else(|| TrainError::MissingArticle(graph.article_id.clone()))?;
        let positives = positives_from_graph(graph);
        if positives.is_empty() {
            skipped.push(format!("{}: no positive pairs", graph.article_id));
            continue;
        }
        match model.article_features(article, &graph.segments) {
            Ok(features) => train.push(TrainableArticle {
                graph: graph.clone(),
                positives,
                features,
            }),
            Err(
                e @ (ModelError::OverlappingSegments { .. }
                | ModelError::ArticleTooLong { .. }
                | ModelError::SegmentWithoutTokens { .. }),
            ) => {
                skipped.push(format!("{}: {e}", graph.article_id));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if train.is_empty() {
        return Err(TrainError::EmptyTraining(stage_name));
    }

    // dev features, also computed once
    let mut dev: Vec<(&DependencyGraph, ArticleFeatures)> = Vec::new();
    let mut dev_sorted: Vec<&DependencyGraph> = dev_graphs.iter().collect();
    dev_sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    for graph in dev_sorted {
        let article = by_id
            .get(graph.article_id.as_str())
            .ok_or_else(|| TrainError::MissingArticle(graph.article_id.clone()))?;
        match model.article_features(article, &graph.segments) {
            Ok(features) => dev.push((graph, features)),
            Err(
                e @ (ModelError::OverlappingSegments { .. }
                | ModelError::ArticleTooLong { .. }
                | ModelError::SegmentWithoutTokens { .. }),
            ) => {
                skipped.push(format!("dev {}: {e}", graph.article_id));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let half = config.batch_size / 2;
    let mut adam = Adam::new(model.head.param_count(), config.learning_rate);
    let mut best: Option<(usize, Vec<f64>, DevSummary)> = None;
    let mut per_epoch = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (ai, art) in train.iter().enumerate() {
            let n_batches = art.positives.len().div_ceil(half);
            for bi in 0..n_batches {
                let seed = text::mix_seed(&[
                    config.seed,
                    epoch as u64,
                    ai as u64,
                    bi as u64,
                ]);
                let batch =
                    balance_batch(&art.positives, &art.graph, config.batch_size, seed)?;
                let dim = model.head.input_dim;
                let mut x = Array2::zeros((batch.len(), dim));
                let mut labels = Vec::with_capacity(batch.len());
                for (i, example) in batch.iter().enumerate() {
                    let f = art.features.feature(&example.seg_a, &example.seg_b)?;
                    x.row_mut(i).assign(f);
                    labels.push(label_index(example.label));
                }
                let (loss, grads) = model.head.loss_and_grads(x.view(), &labels)?;
                if !loss.is_finite() {
                    return Err(TrainError::NanLoss(epoch));
                }
                let mut params = model.head.flat_params();
                adam.step(&mut params, &ClassifierHead::flat_grads(&grads));
                model.head.set_flat_params(&params);
                epoch_loss += loss;
                batches += 1;
            }
        }
        let mean_loss = if batches > 0 { epoch_loss / batches as f64 } else { 0.0 };

        let dev_summary = evaluate_cached(&model.head, &dev)?;
        per_epoch.push(EpochRecord {
            epoch,
            loss: mean_loss,
            dev: dev_summary,
        });
        let better = match &best {
            None => true,
            Some((_, _, b)) => dev_summary.mean_f1 > b.mean_f1,
        };
        if better {
            best = Some((epoch, model.head.flat_params(), dev_summary));
        }
    }

    let (best_epoch, best_params, best_dev) = best.expect("at least one epoch ran");
    model.head.set_flat_params(&best_params);
    Ok(StageOutcome {
        name: config.stage.name().into(),
        epochs: config.epochs,
        best_epoch,
        dev: best_dev,
        per_epoch,
        skipped_articles: skipped,
    })
}

fn evaluate_cached(
    head: &ClassifierHead,
    dev: &[(&DependencyGraph, ArticleFeatures)],
) -> Result<DevSummary, TrainError> {
    if dev.is_empty() {
        return Ok(DevSummary {
            pre: Prf::zero(),
            post: Prf::zero(),
            mean_f1: 0.0,
        });
    }
    let mut golds = Vec::with_capacity(dev.len());
    let mut preds = Vec::with_capacity(dev.len());
    for (graph, features) in dev {
        let mut map = BTreeMap::new();
        for (pair, x) in &features.pair_features {
            map.insert(pair.clone(), head.forward(x.view())?);
        }
        preds.push(PairLabelMatrix::from_predictions(
            &graph.article_id,
            &graph.segments,
            &map,
        )?);
        golds.push((*graph).clone());
    }
    let metrics = evaluate(&golds, &preds)?;
    Ok(DevSummary::from_metrics(&metrics))
}

/// Evaluate a scorer over gold graphs (prediction on every ordered pair).
pub fn evaluate_scorer(
    scorer: &dyn PairScorer,
    corpus: &[Article],
    gold: &[DependencyGraph],
) -> Result<LabelMetrics, TrainError> {
    let by_id = index_articles(corpus);
    let mut matrices = Vec::with_capacity(gold.len());
    for graph in gold {
        let article = by_id
            .get(graph.article_id.as_str())
            .ok_or_else(|| TrainError::MissingArticle(graph.article_id.clone()))?;
        let preds = scorer.score_pairs(article, &graph.segments)?;
        matrices.push(PairLabelMatrix::from_predictions(
            &graph.article_id,
            &graph.segments,
            &preds,
        )?);
    }
    Ok(evaluate(gold, &matrices)?)
}

/// Statistics from one augmentation pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AugmentStats {
    pub added_edges: usize,
    pub overridden_edges: usize,
}

/// Augment weak graphs with confident model predictions: add an edge where
/// the heuristics left none, and (optionally) override a conflicting
/// heuristic label. Heuristic edges never contradicted above the threshold
/// are retained. Segment sets are preserved exactly.
pub fn self_train_augment(
    scorer: &dyn PairScorer,
    corpus: &[Article],
    weak_graphs: &[DependencyGraph],
    config: &SelfTrainConfig,
) -> Result<(Vec<DependencyGraph>, AugmentStats), TrainError> {
    config.validate()?;
    let by_id = index_articles(corpus);
    let mut stats = AugmentStats::default();
    let mut out = Vec::with_capacity(weak_graphs.len());
    let mut sorted: Vec<&DependencyGraph> = weak_graphs.iter().collect();
    sorted.sort_by(|a, b| a.article_id.cmp(&b.article_id));
    for graph in sorted {
        let article = by_id
            .get(graph.article_id.as_str())
            .ok_or_else(|| TrainError::MissingArticle(graph.article_id.clone()))?;
        let predictions = scorer.score_pairs(article, &graph.segments)?;
        let mut labels: BTreeMap<(String, String), RelationLabel> = graph
            .edges
            .iter()
            .map(|e| ((e.head.clone(), e.tail.clone()), e.label))
            .collect();
        for (pair, pred) in predictions {
            if pred.label == RelationLabel::Null || pred.confidence() < config.confidence_threshold
            {
                continue;
            }
            match labels.get_mut(&pair) {
                None => {
                    labels.insert(pair, pred.label);
                    stats.added_edges += 1;
                }
                Some(existing) => {
                    if *existing != pred.label && config.override_conflicts {
                        *existing = pred.label;
                        stats.overridden_edges += 1;
                    }
                }
            }
        }
        let edges: Vec<Edge> = labels
            .into_iter()
            .map(|((head, tail), label)| Edge { head, tail, label })
            .collect();
        out.push(DependencyGraph {
            article_id: graph.article_id.clone(),
            provenance: Provenance::Pseudo,
            segments: graph.segments.clone(),
            edges,
        });
    }
    Ok((out, stats))
}

// ─── pipeline ───────────────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelftrainInit {
    /// Retrain the pseudo stage from the same initialization the weak stage
    /// used.
    FreshInit,
    /// Continue from the finetuned checkpoint.
    FromFinetuned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfTrainSpec {
    pub config: SelfTrainConfig,
    pub rebuild: StageConfig,
    pub refinetune: StageConfig,
    pub init: SelftrainInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub model: ModelSpec,
    /// None skips weak-graph construction ("no heuristics").
    pub heuristics: Option<HeuristicConfig>,
    pub weak: Option<StageConfig>,
    pub finetune: Option<StageConfig>,
    pub selftrain: Option<SelfTrainSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub name: String,
    pub skipped: bool,
    pub epochs: usize,
    pub best_epoch: usize,
    pub dev: Option<DevSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub augment: Option<AugmentStats>,
}

impl StageReport {
    fn skipped(name: &str) -> Self {
        StageReport {
            name: name.into(),
            skipped: true,
            epochs: 0,
            best_epoch: 0,
            dev: None,
            augment: None,
        }
    }

    fn from_outcome(outcome: &StageOutcome) -> Self {
        StageReport {
            name: outcome.name.clone(),
            skipped: false,
            epochs: outcome.epochs,
            best_epoch: outcome.best_epoch,
            dev: Some(outcome.dev),
            augment: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineReport {
    pub seed: u64,
    pub stages: Vec<StageReport>,
}

pub struct PipelineOutcome {
    pub model: RelationModel,
    pub report: PipelineReport,
}

/// Execute weak -> finetune -> augment -> retrain on pseudo -> finetune
/// again, any of which may be skipped by the config. Zero-shot is weak only;
/// "no heuristics" is finetune only.
pub fn run_pipeline(
    corpus: &[Article],
    annotations: &[LingAnnotations],
    annotated_graphs: &[DependencyGraph],
    splits: &SplitSpec,
    config: &PipelineConfig,
) -> Result<PipelineOutcome, TrainError> {
    if config.weak.is_some() && config.heuristics.is_none() {
        return Err(TrainError::StageOrder(
            "weak training requires a heuristic config".into(),
        ));
    }
    if config.selftrain.is_some() && config.finetune.is_none() {
        return Err(TrainError::StageOrder(
            "self-training cannot run before finetuning".into(),
        ));
    }

    let dev_gold: Vec<DependencyGraph> = annotated_graphs
        .iter()
        .filter(|g| splits.dev.contains(&g.article_id))
        .cloned()
        .collect();
    let train_gold: Vec<DependencyGraph> = annotated_graphs
        .iter()
        .filter(|g| splits.train.contains(&g.article_id))
        .cloned()
        .collect();
    // weak supervision never touches dev or test articles
    let weak_articles: Vec<Article> = corpus
        .iter()
        .filter(|a| !splits.dev.contains(&a.id) && !splits.test.contains(&a.id))
        .cloned()
        .collect();

    let mut model = RelationModel::new(config.model.variant, config.model.seed);
    let mut stages = Vec::with_capacity(5);

    let weak_graphs: Option<Vec<DependencyGraph>> = match &config.heuristics {
        Some(heur) => Some(
            build_weak_dataset(&weak_articles, annotations, heur, None)?
                .graphs,
        ),
        None => None,
    };

    match (&config.weak, &weak_graphs) {
        (Some(stage_config), Some(graphs)) => {
            let outcome = train_stage(&mut model, graphs, corpus, &dev_gold, stage_config)?;
            stages.push(StageReport::from_outcome(&outcome));
        }
        _ => stages.push(StageReport::skipped("weak")),
    }

    match &config.finetune {
        Some(stage_config) => {
            let outcome =
                train_stage(&mut model, &train_gold, corpus, &dev_gold, stage_config)?;
            stages.push(StageReport::from_outcome(&outcome));
        }
        None => stages.push(StageReport::skipped("finetune")),
    }

    match &config.selftrain {
        Some(spec) => {
            let base = match &weak_graphs {
                Some(graphs) => graphs.clone(),
                None => segment_only_graphs(&weak_articles, annotations)?,
            };
            let (pseudo, augment_stats) =
                self_train_augment(&model, corpus, &base, &spec.config)?;
            stages.push(StageReport {
                name: "augment".into(),
                skipped: false,
                epochs: 0,
                best_epoch: 0,
                dev: None,
                augment: Some(augment_stats),
            });

            let mut rebuilt = match spec.init {
                SelftrainInit::FreshInit => {
                    RelationModel::new(config.model.variant, config.model.seed)
                }
                SelftrainInit::FromFinetuned => model.clone(),
            };
            let outcome =
                train_stage(&mut rebuilt, &pseudo, corpus, &dev_gold, &spec.rebuild)?;
            stages.push(StageReport::from_outcome(&outcome));
            model = rebuilt;

            let outcome =
                train_stage(&mut model, &train_gold, corpus, &dev_gold, &spec.refinetune)?;
            stages.push(StageReport::from_outcome(&outcome));
        }
        None => {
            stages.push(StageReport::skipped("augment"));
            stages.push(StageReport::skipped("selftrain_rebuild"));
            stages.push(StageReport::skipped("selftrain_finetune"));
        }
    }

    Ok(PipelineOutcome {
        model,
        report: PipelineReport {
            seed: config.model.seed,
            stages,
        },
    })
}

#[cfg(test)]
mod tests;
