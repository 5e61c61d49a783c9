//! The discriminative model: tanh projections of the lyrics query and of
//! (audio, sheet) pair embeddings, a hinge relevance score comparing a
//! candidate pair against a ground-truth pair, and its sigmoid probability.

use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::prob::{log_one_minus_sigmoid, log_sigmoid};
use crate::numkit::{sigmoid, squared_distance, Activation, MlpParams};

pub const DEFAULT_PROJECTION_DIM: usize = 64;
pub const DEFAULT_MARGIN: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDiscriminator")]
pub struct DiscriminatorParams {
    pub query_projector: MlpParams,
    pub pair_projector: MlpParams,
    pub alpha: f64,
}

#[derive(Deserialize)]
struct RawDiscriminator {
    query_projector: MlpParams,
    pair_projector: MlpParams,
    alpha: f64,
}

impl TryFrom<RawDiscriminator> for DiscriminatorParams {
    type Error = Error;

    fn try_from(raw: RawDiscriminator) -> Result<Self> {
        DiscriminatorParams::new(raw.query_projector, raw.pair_projector, raw.alpha)
    }
}

impl DiscriminatorParams {
    pub fn new(query_projector: MlpParams, pair_projector: MlpParams, alpha: f64) -> Result<Self> {
        if query_projector.output_dim() != pair_projector.output_dim() {
            return Err(Error::shape(
                "discriminator projector outputs",
                query_projector.output_dim(),
                pair_projector.output_dim(),
            ));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::arg("margin alpha must be positive"));
        }
        Ok(Self {
            query_projector,
            pair_projector,
            alpha,
        })
    }

    /// Single `tanh(W x + b)` layer per projector.
    pub fn init<R: Rng + ?Sized>(
        query_dim: usize,
        pair_dim: usize,
        projection_dim: usize,
        alpha: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let q = MlpParams::init(&[query_dim, projection_dim], Activation::Tanh, rng)?;
        let p = MlpParams::init(&[pair_dim, projection_dim], Activation::Tanh, rng)?;
        Self::new(q, p, alpha)
    }

    pub fn zeros(query_dim: usize, pair_dim: usize, projection_dim: usize, alpha: f64) -> Result<Self> {
        Self::new(
            MlpParams::zeros(&[query_dim, projection_dim], Activation::Tanh)?,
            MlpParams::zeros(&[pair_dim, projection_dim], Activation::Tanh)?,
            alpha,
        )
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            query_projector: self.query_projector.zeros_like(),
            pair_projector: self.pair_projector.zeros_like(),
            alpha: self.alpha,
        }
    }

    pub fn num_params(&self) -> usize {
        self.query_projector.num_params() + self.pair_projector.num_params()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.query_projector.tensors();
        t.extend(self.pair_projector.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.query_projector.tensors_mut();
        t.extend(self.pair_projector.tensors_mut());
        t
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        let nq = self.query_projector.num_params();
        if flat.len() != self.num_params() {
            return Err(Error::shape(
                "DiscriminatorParams::set_flat",
                self.num_params(),
                flat.len(),
            ));
        }
        self.query_projector.set_flat(&flat[..nq])?;
        self.pair_projector.set_flat(&flat[nq..])
    }

    pub fn add_scaled(&mut self, scale: f64, other: &DiscriminatorParams) -> Result<()> {
        self.query_projector.add_scaled(scale, &other.query_projector)?;
        self.pair_projector.add_scaled(scale, &other.pair_projector)
    }

    pub fn is_finite(&self) -> bool {
        self.query_projector.is_finite() && self.pair_projector.is_finite()
    }
}

/// `tanh(W v + b)` through a projector.
pub fn theta(projector: &MlpParams, vec: &[f64]) -> Result<Vec<f64>> {
    projector.forward(vec)
}

/// `alpha + d_true - d_gen` before the hinge.
#[inline]
pub fn pre_hinge(d_true: f64, d_gen: f64, alpha: f64) -> f64 {
    alpha + d_true - d_gen
}

/// `max(0, alpha + d_true - d_gen)`.
#[inline]
pub fn relevance_from_distances(d_true: f64, d_gen: f64, alpha: f64) -> f64 {
    pre_hinge(d_true, d_gen, alpha).max(0.0)
}

/// Relevance score of `p_gen` for query `q`, judged against `p_true`.
pub fn relevance(disc: &DiscriminatorParams, q: &[f64], p_true: &[f64], p_gen: &[f64]) -> Result<f64> {
    let tq = theta(&disc.query_projector, q)?;
    let tt = theta(&disc.pair_projector, p_true)?;
    let tg = theta(&disc.pair_projector, p_gen)?;
    Ok(relevance_from_distances(
        squared_distance(&tq, &tt),
        squared_distance(&tq, &tg),
        disc.alpha,
    ))
}

/// `D(p | q) = sigmoid(phi)`.
#[inline]
pub fn prob(phi: f64) -> f64 {
    sigmoid(phi)
}

/// Which half of the discriminator objective a pair contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSource {
    /// Contributes `log D(p | q)`.
    GroundTruth,
    /// Contributes `log(1 - D(p | q))`.
    Generated,
}

/// Relevance evaluation with everything needed for backpropagation.
#[derive(Debug, Clone)]
pub struct RelevanceEval {
    pub phi: f64,
    pub pre_hinge: f64,
    pub grads: DiscriminatorParams,
}

/// `phi` and its gradient w.r.t. the discriminator parameters. The hinge
/// uses subgradient 0 at the kink.
pub fn relevance_grad(disc: &DiscriminatorParams, q: &[f64], p_true: &[f64], p_gen: &[f64]) -> Result<RelevanceEval> {
    let mut grads = disc.zeros_like();
    let (phi, pre) = relevance_accumulate(disc, q, p_true, p_gen, |_| 1.0, &mut grads)?;
    Ok(RelevanceEval {
        phi,
        pre_hinge: pre,
        grads,
    })
}

/// Adds `scale(phi) * dphi/dparams` into `grads`; returns `(phi, pre_hinge)`.
pub(crate) fn relevance_accumulate(
    disc: &DiscriminatorParams,
    q: &[f64],
    p_true: &[f64],
    p_gen: &[f64],
    scale: impl FnOnce(f64) -> f64,
    grads: &mut DiscriminatorParams,
) -> Result<(f64, f64)> {
    let tq = disc.query_projector.forward_trace(q)?;
    let tt = disc.pair_projector.forward_trace(p_true)?;
    let tg = disc.pair_projector.forward_trace(p_gen)?;
    let (a, b, c) = (tq.output(), tt.output(), tg.output());
    let pre = pre_hinge(squared_distance(a, b), squared_distance(a, c), disc.alpha);
    if pre <= 0.0 {
        return Ok((0.0, pre));
    }
    let scale = scale(pre);
    if scale != 0.0 {
        let da: Vec<f64> = b.iter().zip(c).map(|(bi, ci)| scale * 2.0 * (ci - bi)).collect();
        let db: Vec<f64> = a.iter().zip(b).map(|(ai, bi)| -scale * 2.0 * (ai - bi)).collect();
        let dc: Vec<f64> = a.iter().zip(c).map(|(ai, ci)| scale * 2.0 * (ai - ci)).collect();
        disc.query_projector
            .backward_into(&tq, &da, &mut grads.query_projector, false)?;
        disc.pair_projector
            .backward_into(&tt, &db, &mut grads.pair_projector, false)?;
        disc.pair_projector
            .backward_into(&tg, &dc, &mut grads.pair_projector, false)?;
    }
    Ok((pre, pre))
}

/// Log-likelihood term of one pair, `log D` or `log(1 - D)`.
pub fn log_term(phi: f64, source: PairSource) -> f64 {
    match source {
        PairSource::GroundTruth => log_sigmoid(phi),
        PairSource::Generated => log_one_minus_sigmoid(phi),
    }
}

/// d log_term / d phi
pub fn log_term_slope(phi: f64, source: PairSource) -> f64 {
    match source {
        PairSource::GroundTruth => 1.0 - sigmoid(phi),
        PairSource::Generated => -sigmoid(phi),
    }
}

/// `log D` or `log(1 - D)` for one pair with its parameter gradient.
/// `p_eval` occupies the generated slot of the relevance score.
pub fn log_term_grad(
    disc: &DiscriminatorParams,
    q: &[f64],
    p_anchor: &[f64],
    p_eval: &[f64],
    source: PairSource,
) -> Result<(f64, f64, DiscriminatorParams)> {
    let mut grads = disc.zeros_like();
    let (phi, pre) = relevance_accumulate(disc, q, p_anchor, p_eval, |phi| log_term_slope(phi, source), &mut grads)?;
    Ok((log_term(phi, source), pre, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{DenseMatrix, Layer};
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_projector(w: f64) -> MlpParams {
        MlpParams::new(vec![Layer {
            weight: DenseMatrix::new(1, 1, vec![w]).unwrap(),
            bias: vec![0.0],
            activation: Activation::Tanh,
        }])
        .unwrap()
    }

    #[test]
    fn theta_examples() {
        let z = MlpParams::zeros(&[3, 2], Activation::Tanh).unwrap();
        assert_eq!(theta(&z, &[5.0, -1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
        let t = theta(&scalar_projector(1.0), &[1.0]).unwrap();
        assert!((t[0] - 0.761_594_155_955_764_9).abs() < 1e-12);
        let big = theta(&scalar_projector(1.0), &[50.0]).unwrap();
        assert!(big[0] <= 1.0 && big[0] > 0.999);
        assert!(theta(&z, &[1.0]).is_err());
    }

    #[test]
    fn relevance_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = DiscriminatorParams::init(3, 4, 5, 1.0, &mut rng).unwrap();
        let p = [0.1, -0.2, 0.3, 0.9];
        assert_eq!(relevance(&d, &[0.5, 0.5, -1.0], &p, &p).unwrap(), 1.0);
        assert_eq!(relevance_from_distances(0.0, 3.0, 1.0), 0.0);
        assert!((relevance_from_distances(0.5, 0.25, 1.0) - 1.25).abs() < 1e-15);
    }

    #[test]
    fn prob_examples() {
        assert_eq!(prob(0.0), 0.5);
        assert!((prob(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!(prob(1e6) <= 1.0 && prob(1e6).is_finite());
    }

    #[test]
    fn inactive_hinge_has_zero_gradient() {
        // Query sits on the true pair, far from the generated one.
        let d = DiscriminatorParams::new(scalar_projector(1.0), scalar_projector(1.0), 0.1).unwrap();
        let eval = relevance_grad(&d, &[2.0], &[2.0], &[-2.0]).unwrap();
        assert_eq!(eval.phi, 0.0);
        assert!(eval.pre_hinge < 0.0);
        assert!(eval.grads.to_flat().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn mismatched_projectors_rejected() {
        let q = MlpParams::zeros(&[3, 2], Activation::Tanh).unwrap();
        let p = MlpParams::zeros(&[4, 3], Activation::Tanh).unwrap();
        assert!(DiscriminatorParams::new(q.clone(), p, 1.0).is_err());
        let p = MlpParams::zeros(&[4, 2], Activation::Tanh).unwrap();
        assert!(DiscriminatorParams::new(q, p, 0.0).is_err());
    }
}
