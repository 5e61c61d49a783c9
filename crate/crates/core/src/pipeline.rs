//! The end-to-end experiment: split, fit CCA on the training split, build
//! ground-truth pairs, train one variant, evaluate on the test split.

use serde::{Deserialize, Serialize};

use crate::cca::{default_components, fit_cca, CcaModel, DEFAULT_EPSILON};
use crate::data::{split, TripletDataset};
use crate::error::{Error, Result};
use crate::eval::{evaluate_all, RetrievalReport};
use crate::groundtruth::{build_pairs_with, PairSet, DEFAULT_NEIGHBORS};
use crate::trainer::{train_variant, TrainConfig, TrainHistory, TrainedModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub train: TrainConfig,
    /// Train, validation, test fractions.
    pub split: [f64; 3],
    pub cca_epsilon: f64,
    /// Defaults to `min(32, view dims, n - 1)`.
    pub cca_components: Option<usize>,
    pub knn_k: usize,
    pub symmetric_pairs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            split: [0.8, 0.1, 0.1],
            cca_epsilon: DEFAULT_EPSILON,
            cca_components: None,
            knn_k: DEFAULT_NEIGHBORS,
            symmetric_pairs: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Splits {
    pub train: TripletDataset,
    pub val: TripletDataset,
    pub test: TripletDataset,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub splits: Splits,
    pub cca: CcaModel,
    pub pairs: PairSet,
    pub model: TrainedModel,
    pub history: TrainHistory,
    pub report: RetrievalReport,
}

/// Splits with the training seed so every variant sees the same partition.
pub fn split_dataset(cfg: &ExperimentConfig, data: &TripletDataset) -> Result<Splits> {
    let (train, val, test) = split(data, cfg.split, cfg.train.seed)?;
    Ok(Splits { train, val, test })
}

pub fn fit_ground_truth(cfg: &ExperimentConfig, train: &TripletDataset) -> Result<(CcaModel, PairSet)> {
    let k = cfg
        .cca_components
        .unwrap_or_else(|| default_components(train.audio().dim(), train.sheet().dim(), train.len()));
    let cca = fit_cca(train.audio().vectors(), train.sheet().vectors(), k, cfg.cca_epsilon)?;
    let pairs = build_pairs_with(&cca, train.audio(), train.sheet(), cfg.knn_k, cfg.symmetric_pairs)?;
    Ok((cca, pairs))
}

pub fn run_experiment(cfg: &ExperimentConfig, data: &TripletDataset) -> Result<Experiment> {
    if data.is_empty() {
        return Err(Error::arg("empty dataset"));
    }
    let splits = split_dataset(cfg, data)?;
    if splits.test.is_empty() {
        return Err(Error::arg("test split is empty"));
    }
    let (cca, pairs) = fit_ground_truth(cfg, &splits.train)?;
    let outcome = train_variant(&cfg.train, &splits.train, Some(&splits.val), &pairs)?;
    let report = evaluate_all(&outcome.model.generator, &splits.test, cfg.train.variant.tag())?;
    Ok(Experiment {
        splits,
        cca,
        pairs,
        model: outcome.model,
        history: outcome.history,
        report,
    })
}
