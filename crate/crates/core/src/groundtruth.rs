//! Ground-truth audio/sheet pairs from nearest neighbours in CCA space.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use serde::{Deserialize, Serialize};

use crate::cca::{CcaModel, View};
use crate::data::FeatureTable;
use crate::error::{Error, Result};
use crate::numkit::{squared_distance, DenseMatrix};

pub const DEFAULT_NEIGHBORS: usize = 5;
pub const SQUARED_EUCLIDEAN: &str = "squared-euclidean";

/// `(audio_index, sheet_index)` pairs declared relevant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSet {
    pub k: usize,
    pub distance_metric: String,
    pub pairs: Vec<(usize, usize)>,
    #[serde(skip)]
    partners: Vec<Vec<usize>>,
}

impl PairSet {
    /// Builds a pair set for a gallery of `n_audio` items, indexing partners.
    pub fn from_pairs(k: usize, n_audio: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut partners = alloc::vec![Vec::new(); n_audio];
        for &(a, s) in &pairs {
            let slot = partners
                .get_mut(a)
                .ok_or_else(|| Error::data(alloc::format!("audio index {a} out of range")))?;
            if slot.contains(&s) {
                return Err(Error::data(alloc::format!("duplicate pair ({a}, {s})")));
            }
            slot.push(s);
        }
        Ok(Self {
            k,
            distance_metric: SQUARED_EUCLIDEAN.to_string(),
            pairs,
            partners,
        })
    }

    /// Rebuilds the partner index after deserialization.
    pub fn reindex(self, n_audio: usize) -> Result<Self> {
        Self::from_pairs(self.k, n_audio, self.pairs)
    }

    /// Sheet partners of an audio item, nearest first.
    pub fn partners(&self, audio_index: usize) -> Result<&[usize]> {
        match self.partners.get(audio_index) {
            Some(p) if !p.is_empty() => Ok(p),
            _ => Err(Error::data(alloc::format!(
                "no ground-truth pair for index {audio_index}"
            ))),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn contains(&self, audio_index: usize, sheet_index: usize) -> bool {
        self.partners.get(audio_index).is_some_and(|p| p.contains(&sheet_index))
    }
}

/// For every audio item, pairs it with the `k` sheet items nearest in CCA
/// space (squared Euclidean, ties by ascending sheet index).
pub fn build_pairs(model: &CcaModel, audio_db: &FeatureTable, sheet_db: &FeatureTable, k: usize) -> Result<PairSet> {
    build_pairs_with(model, audio_db, sheet_db, k, false)
}

/// As [`build_pairs`]; with `symmetric` also adds, for every sheet item,
/// its `k` nearest audio items.
pub fn build_pairs_with(
    model: &CcaModel,
    audio_db: &FeatureTable,
    sheet_db: &FeatureTable,
    k: usize,
    symmetric: bool,
) -> Result<PairSet> {
    if audio_db.is_empty() || sheet_db.is_empty() {
        return Err(Error::arg("ground truth needs non-empty galleries"));
    }
    if audio_db.len() != sheet_db.len() {
        return Err(Error::shape(
            "build_pairs gallery alignment",
            audio_db.len(),
            sheet_db.len(),
        ));
    }
    if k == 0 {
        return Err(Error::arg("k must be at least 1"));
    }
    let audio = model.project_rows(audio_db.vectors(), View::Audio)?;
    let sheet = model.project_rows(sheet_db.vectors(), View::Sheet)?;
    let mut pairs = Vec::with_capacity(audio.rows() * k.min(sheet.rows()));
    for (i, query) in audio.iter_rows().enumerate() {
        pairs.extend(nearest(query, &sheet, k).into_iter().map(|j| (i, j)));
    }
    if symmetric {
        for (j, query) in sheet.iter_rows().enumerate() {
            for i in nearest(query, &audio, k) {
                if !pairs.contains(&(i, j)) {
                    pairs.push((i, j));
                }
            }
        }
        pairs.sort_unstable();
    }
    PairSet::from_pairs(k, audio.rows(), pairs)
}

/// Indices of the `k` rows of `gallery` closest to `query`.
pub fn nearest(query: &[f64], gallery: &DenseMatrix, k: usize) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = gallery
        .iter_rows()
        .map(|row| squared_distance(query, row))
        .zip(0..)
        .collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)) };
    let k = k.min(scored.len());
    if k < scored.len() {
        scored.select_nth_unstable_by(k, cmp);
        scored.truncate(k);
    }
    scored.sort_unstable_by(cmp);
    scored.into_iter().map(|(_, j)| j).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cca::fit_cca;
    use crate::data::Modality;
    use alloc::format;
    use alloc::vec;

    fn table(m: Modality, rows: &[Vec<f64>]) -> FeatureTable {
        let ids = (0..rows.len()).map(|i| format!("{i}")).collect();
        FeatureTable::new(m, ids, DenseMatrix::from_rows(rows).unwrap()).unwrap()
    }

    fn identity_model(d: usize) -> CcaModel {
        CcaModel {
            audio_mean: vec![0.0; d],
            sheet_mean: vec![0.0; d],
            audio_projection: DenseMatrix::identity(d),
            sheet_projection: DenseMatrix::identity(d),
            correlations: vec![1.0; d],
            epsilon: 0.0,
        }
    }

    #[test]
    fn single_item_pairs_with_itself() {
        let t = table(Modality::Audio, &[vec![1.0, 2.0]]);
        let s = table(Modality::Sheet, &[vec![3.0, 4.0]]);
        let p = build_pairs(&identity_model(2), &t, &s, 5).unwrap();
        assert_eq!(p.pairs, vec![(0, 0)]);
        assert_eq!(p.distance_metric, "squared-euclidean");
    }

    #[test]
    fn ties_break_by_ascending_sheet_index() {
        let rows = vec![vec![0.5, -0.5]; 6];
        let a = table(Modality::Audio, &rows);
        let s = table(Modality::Sheet, &rows);
        let p = build_pairs(&identity_model(2), &a, &s, 5).unwrap();
        for i in 0..6 {
            assert_eq!(p.partners(i).unwrap(), &[0, 1, 2, 3, 4]);
        }
        assert_eq!(p.len(), 30);
    }

    #[test]
    fn empty_gallery_and_zero_k_are_errors() {
        let e = FeatureTable::new(Modality::Audio, vec![], DenseMatrix::zeros(0, 2)).unwrap();
        let m = identity_model(2);
        assert!(matches!(build_pairs(&m, &e, &e, 1), Err(Error::Argument(_))));
        let t = table(Modality::Audio, &[vec![1.0, 2.0]]);
        assert!(build_pairs(&m, &t, &t, 0).is_err());
    }

    #[test]
    fn symmetric_flag_adds_reverse_neighbours() {
        let a = table(Modality::Audio, &[vec![0.0], vec![1.0], vec![10.0]]);
        let s = table(Modality::Sheet, &[vec![0.1], vec![9.0], vec![9.5]]);
        let m = identity_model(1);
        let one_way = build_pairs(&m, &a, &s, 1).unwrap();
        assert_eq!(one_way.pairs, vec![(0, 0), (1, 0), (2, 2)]);
        let both = build_pairs_with(&m, &a, &s, 1, true).unwrap();
        assert_eq!(both.pairs, vec![(0, 0), (1, 0), (2, 1), (2, 2)]);
    }

    #[test]
    fn works_with_a_fitted_model() {
        let rows: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i % 7) as f64]).collect();
        let a = table(Modality::Audio, &rows);
        let s = table(Modality::Sheet, &rows);
        let m = fit_cca(a.vectors(), s.vectors(), 2, 1e-6).unwrap();
        let p = build_pairs(&m, &a, &s, 1).unwrap();
        for i in 0..12 {
            assert_eq!(p.partners(i).unwrap(), &[i]);
        }
        assert!(p.partners(12).is_err());
    }
}
