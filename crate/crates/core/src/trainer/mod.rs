//! Minimax training of the generator and discriminator, plus the
//! triplet-only and raw-feature adversarial comparison systems.

mod adversarial;
mod baseline;

pub use adversarial::{train_step_d, train_step_g, DStepStats, GStepStats};
pub use baseline::{train_step_triplet, triplet_loss, triplet_loss_and_grad, TripletStepStats};

use alloc::vec::Vec;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::TripletDataset;
use crate::discriminator::{DiscriminatorParams, DEFAULT_MARGIN, DEFAULT_PROJECTION_DIM};
use crate::error::{Error, Result};
use crate::eval::{evaluate_all, RetrievalReport};
use crate::generator::{CandidatePolicy, GeneratorParams, DEFAULT_COMMON_DIM, DEFAULT_HIDDEN_DIM};
use crate::groundtruth::PairSet;
use crate::numkit::OptState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Full adversarial model with teacher-student transfer.
    Ugaar,
    /// Triplet-loss training of the three branches; no discriminator.
    Baseline,
    /// Adversarial training over identity adapters on the raw features.
    BaselineGan,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::Ugaar => "ugaar",
            Variant::Baseline => "baseline",
            Variant::BaselineGan => "baseline-gan",
        }
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ugaar" => Ok(Variant::Ugaar),
            "baseline" => Ok(Variant::Baseline),
            "baseline-gan" => Ok(Variant::BaselineGan),
            other => Err(Error::arg(alloc::format!(
                "unknown variant {other:?} (expected ugaar, baseline or baseline-gan)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub variant: Variant,
    pub common_dim: usize,
    pub hidden_dim: usize,
    pub projection_dim: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub epochs: usize,
    pub lr_g: f64,
    pub lr_d: f64,
    pub w_kl: f64,
    pub w_adv: f64,
    pub d_steps_per_g_step: usize,
    pub candidates: CandidatePolicy,
    pub temperature: f64,
    pub validation_every: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            variant: Variant::Ugaar,
            common_dim: DEFAULT_COMMON_DIM,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            projection_dim: DEFAULT_PROJECTION_DIM,
            batch_size: 64,
            alpha: DEFAULT_MARGIN,
            epochs: 200,
            lr_g: 1e-4,
            lr_d: 1e-4,
            w_kl: 1.0,
            w_adv: 1.0,
            d_steps_per_g_step: 1,
            candidates: CandidatePolicy::default(),
            temperature: 1.0,
            validation_every: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::arg(m));
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.common_dim == 0 || self.hidden_dim == 0 || self.projection_dim == 0 {
            return bad("layer widths must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive");
        }
        for (name, v) in [
            ("lr_g", self.lr_g),
            ("lr_d", self.lr_d),
            ("w_kl", self.w_kl),
            ("w_adv", self.w_adv),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::arg(alloc::format!("{name} must be finite and non-negative")));
            }
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.d_steps_per_g_step == 0 {
            return bad("d_steps_per_g_step must be at least 1");
        }
        if self.candidates.sampled_pool_size == 0 {
            return bad("sampled_pool_size must be positive");
        }
        Ok(())
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub kl_loss: f64,
    /// Validation median rank per direction, in report order.
    pub validation_medr: Option<Vec<f64>>,
    pub d_output_min: Option<f64>,
    pub d_output_max: Option<f64>,
    pub phi_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Validation median ranks of the untrained model.
    pub initial_validation_medr: Option<Vec<f64>>,
    pub records: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub generator: GeneratorParams,
    pub discriminator: Option<DiscriminatorParams>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub history: TrainHistory,
}

/// Mutable training state: parameters, optimizers and the single seeded
/// random stream every stochastic choice draws from.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub generator: GeneratorParams,
    pub discriminator: Option<DiscriminatorParams>,
    pub opt_g: OptState,
    pub opt_d: OptState,
    pub rng: ChaCha8Rng,
}

impl Trainer {
    /// Initializes parameters for `config.variant` on data of the given
    /// per-modality widths.
    pub fn new(config: TrainConfig, input_dims: [usize; 3]) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let generator = match config.variant {
            Variant::BaselineGan => {
                GeneratorParams::identity_adapters(input_dims, config.common_dim, config.temperature)?
            }
            _ => GeneratorParams::init(
                input_dims,
                config.hidden_dim,
                config.common_dim,
                config.temperature,
                &mut rng,
            )?,
        };
        let discriminator = match config.variant {
            Variant::Baseline => None,
            _ => Some(DiscriminatorParams::init(
                input_dims[2],
                2 * config.common_dim,
                config.projection_dim,
                config.alpha,
                &mut rng,
            )?),
        };
        Ok(Self {
            opt_g: OptState::with_lr(config.lr_g),
            opt_d: OptState::with_lr(config.lr_d),
            config,
            generator,
            discriminator,
            rng,
        })
    }

    /// One pass over `data` in a freshly shuffled order.
    pub fn run_epoch(&mut self, data: &TripletDataset, pairs: &PairSet, epoch: usize) -> Result<EpochRecord> {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut self.rng);
        let mut acc = EpochAccumulator::default();
        for batch in order.chunks(self.config.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            match (self.config.variant, self.discriminator.as_mut()) {
                (Variant::Baseline, _) => {
                    let s = train_step_triplet(
                        &mut self.generator,
                        &mut self.opt_g,
                        data,
                        batch,
                        pairs,
                        self.config.alpha,
                        &mut self.rng,
                    )?;
                    acc.g_loss += s.triplet_loss;
                    acc.kl_loss += s.kl_loss;
                }
                (_, Some(disc)) => {
                    for _ in 0..self.config.d_steps_per_g_step {
                        let d = train_step_d(
                            &self.generator,
                            disc,
                            &mut self.opt_d,
                            data,
                            batch,
                            pairs,
                            &self.config.candidates,
                            &mut self.rng,
                        )?;
                        acc.d_loss += d.loss / self.config.d_steps_per_g_step as f64;
                        acc.observe(d.d_output_min, d.d_output_max, d.phi_min);
                    }
                    let w_kl = match self.config.variant {
                        Variant::BaselineGan => 0.0,
                        _ => self.config.w_kl,
                    };
                    let g = train_step_g(
                        &mut self.generator,
                        disc,
                        &mut self.opt_g,
                        data,
                        batch,
                        pairs,
                        &self.config.candidates,
                        w_kl,
                        self.config.w_adv,
                        &mut self.rng,
                    )?;
                    acc.g_loss += g.total;
                    acc.kl_loss += g.kl_loss;
                    acc.observe(g.d_output_min, g.d_output_max, g.phi_min);
                }
                (_, None) => return Err(Error::data("adversarial variant without a discriminator")),
            }
            acc.batches += 1;
        }
        let record = acc.finish(epoch, self.discriminator.is_some());
        if ![record.d_loss, record.g_loss, record.kl_loss]
            .iter()
            .all(|v| v.is_finite())
        {
            return Err(Error::data(alloc::format!("non-finite loss at epoch {epoch}")));
        }
        Ok(record)
    }

    pub fn model(&self) -> TrainedModel {
        TrainedModel {
            generator: self.generator.clone(),
            discriminator: self.discriminator.clone(),
        }
    }
}

#[derive(Default)]
struct EpochAccumulator {
    batches: usize,
    d_loss: f64,
    g_loss: f64,
    kl_loss: f64,
    d_min: Option<f64>,
    d_max: Option<f64>,
    phi_min: Option<f64>,
}

impl EpochAccumulator {
    fn observe(&mut self, d_min: f64, d_max: f64, phi_min: f64) {
        self.d_min = Some(self.d_min.map_or(d_min, |v| v.min(d_min)));
        self.d_max = Some(self.d_max.map_or(d_max, |v| v.max(d_max)));
        self.phi_min = Some(self.phi_min.map_or(phi_min, |v| v.min(phi_min)));
    }

    fn finish(self, epoch: usize, adversarial: bool) -> EpochRecord {
        let n = self.batches.max(1) as f64;
        EpochRecord {
            epoch,
            d_loss: if adversarial { self.d_loss / n } else { 0.0 },
            g_loss: self.g_loss / n,
            kl_loss: self.kl_loss / n,
            validation_medr: None,
            d_output_min: self.d_min,
            d_output_max: self.d_max,
            phi_min: self.phi_min,
        }
    }
}

fn validation_medr(gen: &GeneratorParams, val: Option<&TripletDataset>) -> Result<Option<Vec<f64>>> {
    match val {
        Some(v) if !v.is_empty() => {
            let report: RetrievalReport = evaluate_all(gen, v, "validation")?;
            Ok(Some(report.directions.iter().map(|d| d.metrics.median_rank).collect()))
        }
        _ => Ok(None),
    }
}

/// Trains `config.variant` for `config.epochs` epochs. Validation median
/// ranks are recorded every `validation_every` epochs and at the last one.
pub fn train_variant(
    config: &TrainConfig,
    train_data: &TripletDataset,
    val_data: Option<&TripletDataset>,
    pairs: &PairSet,
) -> Result<TrainOutcome> {
    if train_data.len() < 2 {
        return Err(Error::arg("training needs at least two triplets"));
    }
    let dims = [
        train_data.audio().dim(),
        train_data.sheet().dim(),
        train_data.lyrics().dim(),
    ];
    let mut trainer = Trainer::new(config.clone(), dims)?;
    let mut history = TrainHistory {
        initial_validation_medr: validation_medr(&trainer.generator, val_data)?,
        records: Vec::with_capacity(config.epochs),
    };
    for epoch in 1..=config.epochs {
        let mut record = trainer.run_epoch(train_data, pairs, epoch)?;
        let every = config.validation_every.max(1);
        if epoch % every == 0 || epoch == config.epochs {
            record.validation_medr = validation_medr(&trainer.generator, val_data)?;
        }
        history.records.push(record);
    }
    Ok(TrainOutcome {
        model: trainer.model(),
        history,
    })
}

/// Full adversarial model.
pub fn train(
    config: &TrainConfig,
    train_data: &TripletDataset,
    val_data: Option<&TripletDataset>,
    pairs: &PairSet,
) -> Result<TrainOutcome> {
    train_variant(
        &TrainConfig {
            variant: Variant::Ugaar,
            ..config.clone()
        },
        train_data,
        val_data,
        pairs,
    )
}

/// Triplet-loss-only comparison system.
pub fn train_baseline(
    config: &TrainConfig,
    train_data: &TripletDataset,
    val_data: Option<&TripletDataset>,
    pairs: &PairSet,
) -> Result<TrainOutcome> {
    train_variant(
        &TrainConfig {
            variant: Variant::Baseline,
            ..config.clone()
        },
        train_data,
        val_data,
        pairs,
    )
}

/// Adversarial training over the raw features.
pub fn train_baseline_gan(
    config: &TrainConfig,
    train_data: &TripletDataset,
    val_data: Option<&TripletDataset>,
    pairs: &PairSet,
) -> Result<TrainOutcome> {
    train_variant(
        &TrainConfig {
            variant: Variant::BaselineGan,
            ..config.clone()
        },
        train_data,
        val_data,
        pairs,
    )
}
