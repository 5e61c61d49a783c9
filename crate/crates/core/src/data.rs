//! Feature tables, tri-modal datasets, deterministic splitting and the
//! planted-correlation synthetic generator.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Audio,
    Sheet,
    Lyrics,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Audio, Modality::Sheet, Modality::Lyrics];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Sheet => "sheet",
            Modality::Lyrics => "lyrics",
        }
    }

    /// Long name used in report headings.
    pub fn label(self) -> &'static str {
        match self {
            Modality::Audio => "audio",
            Modality::Sheet => "sheet music",
            Modality::Lyrics => "lyrics",
        }
    }
}

/// Per-modality feature vectors keyed by sample id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    modality: Modality,
    ids: Vec<String>,
    vectors: DenseMatrix,
}

impl FeatureTable {
    pub fn new(modality: Modality, ids: Vec<String>, vectors: DenseMatrix) -> Result<Self> {
        if ids.len() != vectors.rows() {
            return Err(Error::shape("FeatureTable ids vs rows", vectors.rows(), ids.len()));
        }
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::data(format!("duplicate id {id:?}")));
            }
        }
        if !vectors.is_finite() {
            return Err(Error::data("feature table has non-finite entries"));
        }
        Ok(Self { modality, ids, vectors })
    }

    pub fn modality(&self) -> Modality {
        self.modality
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn select(&self, indices: &[usize]) -> FeatureTable {
        FeatureTable {
            modality: self.modality,
            ids: indices.iter().map(|&i| self.ids[i].clone()).collect(),
            vectors: self.vectors.select_rows(indices),
        }
    }
}

/// Three index-aligned feature tables.
#[derive(Debug, Clone, PartialEq)]
pub struct TripletDataset {
    audio: FeatureTable,
    sheet: FeatureTable,
    lyrics: FeatureTable,
}

impl TripletDataset {
    pub fn new(audio: FeatureTable, sheet: FeatureTable, lyrics: FeatureTable) -> Result<Self> {
        for (t, m) in [
            (&audio, Modality::Audio),
            (&sheet, Modality::Sheet),
            (&lyrics, Modality::Lyrics),
        ] {
            if t.modality() != m {
                return Err(Error::data(format!(
                    "expected a {} table, got {}",
                    m.name(),
                    t.modality().name()
                )));
            }
        }
        if audio.ids() != sheet.ids() || audio.ids() != lyrics.ids() {
            return Err(Error::data(
                "audio, sheet and lyrics tables must list identical ids in identical order",
            ));
        }
        Ok(Self { audio, sheet, lyrics })
    }

    pub fn table(&self, modality: Modality) -> &FeatureTable {
        match modality {
            Modality::Audio => &self.audio,
            Modality::Sheet => &self.sheet,
            Modality::Lyrics => &self.lyrics,
        }
    }

    pub fn audio(&self) -> &FeatureTable {
        &self.audio
    }

    pub fn sheet(&self) -> &FeatureTable {
        &self.sheet
    }

    pub fn lyrics(&self) -> &FeatureTable {
        &self.lyrics
    }

    pub fn len(&self) -> usize {
        self.audio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audio.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        self.audio.ids()
    }

    pub fn subset(&self, indices: &[usize]) -> TripletDataset {
        TripletDataset {
            audio: self.audio.select(indices),
            sheet: self.sheet.select(indices),
            lyrics: self.lyrics.select(indices),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub latent_dim: usize,
    pub audio_dim: usize,
    pub sheet_dim: usize,
    pub lyrics_dim: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n: 1250,
            latent_dim: 8,
            audio_dim: 128,
            sheet_dim: 96,
            lyrics_dim: 64,
            noise_sigma: 0.3,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::arg("synthetic n must be positive"));
        }
        if self.latent_dim == 0 {
            return Err(Error::arg("latent_dim must be positive"));
        }
        for (name, d) in [
            ("audio_dim", self.audio_dim),
            ("sheet_dim", self.sheet_dim),
            ("lyrics_dim", self.lyrics_dim),
        ] {
            if d < self.latent_dim {
                return Err(Error::arg(format!(
                    "{name} = {d} is smaller than latent_dim = {}",
                    self.latent_dim
                )));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::arg("noise_sigma must be finite and non-negative"));
        }
        Ok(())
    }
}

/// Linear-Gaussian triplets: a shared standard-normal latent `t_i` pushed
/// through one fixed random linear map per modality, plus isotropic noise.
/// Map entries have variance `1 / latent_dim`, so each clean coordinate has
/// unit variance.
pub fn synth_dataset(cfg: &SynthConfig) -> Result<TripletDataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let map_scale = 1.0 / libm::sqrt(cfg.latent_dim as f64);
    let dims = [cfg.audio_dim, cfg.sheet_dim, cfg.lyrics_dim];
    let maps: Vec<DenseMatrix> = dims
        .iter()
        .map(|&d| {
            let values = (0..d * cfg.latent_dim).map(|_| map_scale * normal(&mut rng)).collect();
            DenseMatrix::new(d, cfg.latent_dim, values)
        })
        .collect::<Result<_>>()?;

    let mut buffers: Vec<Vec<f64>> = dims.iter().map(|&d| Vec::with_capacity(cfg.n * d)).collect();
    for _ in 0..cfg.n {
        let latent: Vec<f64> = (0..cfg.latent_dim).map(|_| normal(&mut rng)).collect();
        for (map, buf) in maps.iter().zip(&mut buffers) {
            let clean = map.matvec(&latent)?;
            buf.extend(clean.into_iter().map(|c| c + cfg.noise_sigma * normal(&mut rng)));
        }
    }
    let ids: Vec<String> = (0..cfg.n).map(|i| format!("s{i:06}")).collect();
    let mut tables = Modality::ALL
        .iter()
        .zip(dims)
        .zip(buffers)
        .map(|((&m, d), buf)| DenseMatrix::new(cfg.n, d, buf).and_then(|v| FeatureTable::new(m, ids.clone(), v)));
    let audio = tables.next().unwrap()?;
    let sheet = tables.next().unwrap()?;
    let lyrics = tables.next().unwrap()?;
    TripletDataset::new(audio, sheet, lyrics)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Split sizes for `n` items: rounded train and validation counts, test
/// takes the remainder.
pub fn split_sizes(n: usize, ratios: [f64; 3]) -> Result<[usize; 3]> {
    if ratios.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::arg("split ratios must be finite and non-negative"));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::arg(format!("split ratios sum to {sum}, not 1")));
    }
    let train = (libm::round(n as f64 * ratios[0]) as usize).min(n);
    let val = (libm::round(n as f64 * ratios[1]) as usize).min(n - train);
    Ok([train, val, n - train - val])
}

/// Seeded shuffle followed by contiguous slicing into train, val, test.
pub fn split(
    dataset: &TripletDataset,
    ratios: [f64; 3],
    seed: u64,
) -> Result<(TripletDataset, TripletDataset, TripletDataset)> {
    let [train, val, _] = split_sizes(dataset.len(), ratios)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok((
        dataset.subset(&order[..train]),
        dataset.subset(&order[train..train + val]),
        dataset.subset(&order[train + val..]),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn small() -> SynthConfig {
        SynthConfig {
            n: 10,
            latent_dim: 2,
            audio_dim: 4,
            sheet_dim: 3,
            lyrics_dim: 2,
            noise_sigma: 0.1,
            seed: 5,
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let v = DenseMatrix::zeros(2, 1);
        let err = FeatureTable::new(Modality::Audio, vec!["a".to_string(), "a".to_string()], v);
        assert!(matches!(err, Err(Error::Data(_))));
    }

    #[test]
    fn synth_is_seed_deterministic() {
        let a = synth_dataset(&small()).unwrap();
        let b = synth_dataset(&small()).unwrap();
        assert_eq!(a, b);
        let c = synth_dataset(&SynthConfig { seed: 6, ..small() }).unwrap();
        assert_ne!(a, c);
        assert_eq!(a.audio().dim(), 4);
        assert_eq!(a.lyrics().dim(), 2);
    }

    #[test]
    fn synth_rejects_bad_config() {
        assert!(synth_dataset(&SynthConfig {
            latent_dim: 5,
            ..small()
        })
        .is_err());
        assert!(synth_dataset(&SynthConfig {
            noise_sigma: -1.0,
            ..small()
        })
        .is_err());
    }

    #[test]
    fn split_sizes_examples() {
        assert_eq!(split_sizes(10, [0.8, 0.1, 0.1]).unwrap(), [8, 1, 1]);
        assert_eq!(split_sizes(10, [1.0, 0.0, 0.0]).unwrap(), [10, 0, 0]);
        assert_eq!(split_sizes(1250, [0.8, 0.1, 0.1]).unwrap(), [1000, 125, 125]);
        assert!(split_sizes(10, [0.5, 0.1, 0.1]).is_err());
        assert!(split_sizes(10, [1.2, -0.1, -0.1]).is_err());
    }

    #[test]
    fn split_partitions_ids() {
        let d = synth_dataset(&small()).unwrap();
        let (tr, va, te) = split(&d, [0.8, 0.1, 0.1], 1).unwrap();
        let mut all: Vec<&String> = tr.ids().iter().chain(va.ids()).chain(te.ids()).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
        let (tr2, _, _) = split(&d, [0.8, 0.1, 0.1], 1).unwrap();
        assert_eq!(tr, tr2);
        let (whole, _, _) = split(&d, [1.0, 0.0, 0.0], 3).unwrap();
        assert_eq!(whole.len(), 10);
    }
}
