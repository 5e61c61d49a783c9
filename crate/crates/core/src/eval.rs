//! Six-direction cross-modal retrieval evaluation.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Modality, TripletDataset};
use crate::error::{Error, Result};
use crate::generator::{embed_rows, GeneratorParams};
use crate::numkit::{squared_distance, DenseMatrix};

/// A retrieval direction: rank `gallery` items for each `query` item.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Direction {
    pub query: Modality,
    pub gallery: Modality,
}

impl Direction {
    pub const fn new(query: Modality, gallery: Modality) -> Self {
        Self { query, gallery }
    }

    /// "audio-to-lyrics" style heading.
    pub fn label(&self) -> String {
        alloc::format!("{}-to-{}", self.query.label(), self.gallery.label())
    }
}

/// Report order: audio/lyrics, sheet/lyrics, audio/sheet, each both ways.
pub const DIRECTIONS: [Direction; 6] = [
    Direction::new(Modality::Audio, Modality::Lyrics),
    Direction::new(Modality::Lyrics, Modality::Audio),
    Direction::new(Modality::Sheet, Modality::Lyrics),
    Direction::new(Modality::Lyrics, Modality::Sheet),
    Direction::new(Modality::Audio, Modality::Sheet),
    Direction::new(Modality::Sheet, Modality::Audio),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall_at_1: f64,
    pub recall_at_5: f64,
    pub recall_at_10: f64,
    pub median_rank: f64,
    pub mean_rank: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionReport {
    pub direction: Direction,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub model: String,
    pub n: usize,
    pub directions: Vec<DirectionReport>,
}

impl RetrievalReport {
    pub fn get(&self, direction: Direction) -> Option<&Metrics> {
        self.directions
            .iter()
            .find(|d| d.direction == direction)
            .map(|d| &d.metrics)
    }

    pub fn mean_recall_at_1(&self) -> f64 {
        let n = self.directions.len().max(1) as f64;
        self.directions.iter().map(|d| d.metrics.recall_at_1).sum::<f64>() / n
    }
}

/// For each query row `i`, `1 +` the number of other gallery rows at
/// squared distance `<=` that of gallery row `i`. Ties count against the
/// query.
pub fn rank_of_truth(queries: &DenseMatrix, gallery: &DenseMatrix) -> Result<Vec<usize>> {
    if queries.rows() != gallery.rows() {
        return Err(Error::shape("rank_of_truth rows", queries.rows(), gallery.rows()));
    }
    if queries.cols() != gallery.cols() {
        return Err(Error::shape("rank_of_truth dims", queries.cols(), gallery.cols()));
    }
    if queries.rows() == 0 {
        return Err(Error::arg("rank_of_truth needs at least one item"));
    }
    Ok(queries
        .iter_rows()
        .enumerate()
        .map(|(i, q)| {
            let own = squared_distance(q, gallery.row(i));
            1 + gallery
                .iter_rows()
                .enumerate()
                .filter(|&(j, g)| j != i && squared_distance(q, g) <= own)
                .count()
        })
        .collect())
}

pub fn metrics_from_ranks(ranks: &[usize]) -> Result<Metrics> {
    if ranks.is_empty() {
        return Err(Error::arg("no ranks to summarize"));
    }
    if ranks.contains(&0) {
        return Err(Error::arg("ranks start at 1"));
    }
    let n = ranks.len() as f64;
    let recall = |k: usize| 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median_rank = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    } else {
        sorted[mid] as f64
    };
    Ok(Metrics {
        recall_at_1: recall(1),
        recall_at_5: recall(5),
        recall_at_10: recall(10),
        median_rank,
        mean_rank: ranks.iter().sum::<usize>() as f64 / n,
    })
}

/// Reports all six directions from per-modality embeddings whose rows are
/// index-aligned ground truth.
pub fn evaluate_embeddings(embeddings: &[DenseMatrix; 3], model: &str) -> Result<RetrievalReport> {
    let pick = |m: Modality| match m {
        Modality::Audio => &embeddings[0],
        Modality::Sheet => &embeddings[1],
        Modality::Lyrics => &embeddings[2],
    };
    let directions = DIRECTIONS
        .iter()
        .map(|&direction| {
            let ranks = rank_of_truth(pick(direction.query), pick(direction.gallery))?;
            Ok(DirectionReport {
                direction,
                metrics: metrics_from_ranks(&ranks)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RetrievalReport {
        model: model.to_string(),
        n: embeddings[0].rows(),
        directions,
    })
}

pub fn embed_dataset(gen: &GeneratorParams, data: &TripletDataset) -> Result<[DenseMatrix; 3]> {
    Ok([
        embed_rows(gen, data.audio().vectors(), Modality::Audio)?,
        embed_rows(gen, data.sheet().vectors(), Modality::Sheet)?,
        embed_rows(gen, data.lyrics().vectors(), Modality::Lyrics)?,
    ])
}

/// Embeds each modality with its branch and evaluates the six directions.
pub fn evaluate_all(gen: &GeneratorParams, test: &TripletDataset, model: &str) -> Result<RetrievalReport> {
    evaluate_embeddings(&embed_dataset(gen, test)?, model)
}

/// Expected metrics of a retriever that orders the gallery uniformly at
/// random: every query's true item lands at an independent uniform rank.
pub fn random_baseline<R: Rng + ?Sized>(n: usize, trials: usize, rng: &mut R) -> Result<RetrievalReport> {
    if n == 0 || trials == 0 {
        return Err(Error::arg("random_baseline needs n >= 1 and trials >= 1"));
    }
    let mut directions = Vec::with_capacity(DIRECTIONS.len());
    let mut ranks = alloc::vec![0usize; n];
    for direction in DIRECTIONS {
        let mut acc = Metrics {
            recall_at_1: 0.0,
            recall_at_5: 0.0,
            recall_at_10: 0.0,
            median_rank: 0.0,
            mean_rank: 0.0,
        };
        for _ in 0..trials {
            ranks.iter_mut().for_each(|r| *r = rng.random_range(1..=n));
            let m = metrics_from_ranks(&ranks)?;
            acc.recall_at_1 += m.recall_at_1;
            acc.recall_at_5 += m.recall_at_5;
            acc.recall_at_10 += m.recall_at_10;
            acc.median_rank += m.median_rank;
            acc.mean_rank += m.mean_rank;
        }
        let t = trials as f64;
        directions.push(DirectionReport {
            direction,
            metrics: Metrics {
                recall_at_1: acc.recall_at_1 / t,
                recall_at_5: acc.recall_at_5 / t,
                recall_at_10: acc.recall_at_10 / t,
                median_rank: acc.median_rank / t,
                mean_rank: acc.mean_rank / t,
            },
        });
    }
    Ok(RetrievalReport {
        model: "RANDOM".to_string(),
        n,
        directions,
    })
}
