//! The generative model: three embedding branches into a shared space,
//! teacher-student KL transfer from lyrics to audio and sheet music, and
//! a softmax over candidate (audio, sheet) pairs given a lyrics query.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Modality;
use crate::error::{Error, Result};
use crate::numkit::prob::{kl_unchecked, KL_CLAMP};
use crate::numkit::{
    axpy, log_sum_exp, softmax, squared_distance, Activation, DenseMatrix, Layer, MlpParams, MlpTrace,
};

pub const DEFAULT_COMMON_DIM: usize = 128;
pub const DEFAULT_HIDDEN_DIM: usize = 256;

/// Branch parameters `F` (audio), `G` (sheet) and `H` (lyrics).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGenerator")]
pub struct GeneratorParams {
    pub audio_branch: MlpParams,
    pub sheet_branch: MlpParams,
    pub lyrics_branch: MlpParams,
    pub common_dim: usize,
    pub temperature: f64,
}

#[derive(Deserialize)]
struct RawGenerator {
    audio_branch: MlpParams,
    sheet_branch: MlpParams,
    lyrics_branch: MlpParams,
    common_dim: usize,
    temperature: f64,
}

impl TryFrom<RawGenerator> for GeneratorParams {
    type Error = Error;

    fn try_from(raw: RawGenerator) -> Result<Self> {
        let params = GeneratorParams::new(raw.audio_branch, raw.sheet_branch, raw.lyrics_branch, raw.temperature)?;
        if params.common_dim != raw.common_dim {
            return Err(Error::shape("generator common_dim", raw.common_dim, params.common_dim));
        }
        Ok(params)
    }
}

impl GeneratorParams {
    pub fn new(
        audio_branch: MlpParams,
        sheet_branch: MlpParams,
        lyrics_branch: MlpParams,
        temperature: f64,
    ) -> Result<Self> {
        let common_dim = audio_branch.output_dim();
        for b in [&sheet_branch, &lyrics_branch] {
            if b.output_dim() != common_dim {
                return Err(Error::shape("generator branch output", common_dim, b.output_dim()));
            }
        }
        check_temperature(temperature)?;
        Ok(Self {
            audio_branch,
            sheet_branch,
            lyrics_branch,
            common_dim,
            temperature,
        })
    }

    /// `input -> hidden (tanh) -> common (identity)` per modality.
    pub fn init<R: Rng + ?Sized>(
        input_dims: [usize; 3],
        hidden_dim: usize,
        common_dim: usize,
        temperature: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut branch = |d: usize| MlpParams::init(&[d, hidden_dim, common_dim], Activation::Identity, rng);
        let a = branch(input_dims[0])?;
        let s = branch(input_dims[1])?;
        let l = branch(input_dims[2])?;
        Self::new(a, s, l, temperature)
    }

    pub fn zeros(input_dims: [usize; 3], hidden_dim: usize, common_dim: usize, temperature: f64) -> Result<Self> {
        let branch = |d: usize| MlpParams::zeros(&[d, hidden_dim, common_dim], Activation::Identity);
        Self::new(
            branch(input_dims[0])?,
            branch(input_dims[1])?,
            branch(input_dims[2])?,
            temperature,
        )
    }

    /// Single linear branches that copy the raw features into the common
    /// space, truncating or zero-padding as needed.
    pub fn identity_adapters(input_dims: [usize; 3], common_dim: usize, temperature: f64) -> Result<Self> {
        let adapter = |d: usize| {
            let mut weight = DenseMatrix::zeros(common_dim, d);
            for i in 0..d.min(common_dim) {
                weight.set(i, i, 1.0);
            }
            MlpParams::new(vec![Layer {
                weight,
                bias: vec![0.0; common_dim],
                activation: Activation::Identity,
            }])
        };
        Self::new(
            adapter(input_dims[0])?,
            adapter(input_dims[1])?,
            adapter(input_dims[2])?,
            temperature,
        )
    }

    pub fn branch(&self, modality: Modality) -> &MlpParams {
        match modality {
            Modality::Audio => &self.audio_branch,
            Modality::Sheet => &self.sheet_branch,
            Modality::Lyrics => &self.lyrics_branch,
        }
    }

    pub fn branch_mut(&mut self, modality: Modality) -> &mut MlpParams {
        match modality {
            Modality::Audio => &mut self.audio_branch,
            Modality::Sheet => &mut self.sheet_branch,
            Modality::Lyrics => &mut self.lyrics_branch,
        }
    }

    pub fn input_dims(&self) -> [usize; 3] {
        [
            self.audio_branch.input_dim(),
            self.sheet_branch.input_dim(),
            self.lyrics_branch.input_dim(),
        ]
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            audio_branch: self.audio_branch.zeros_like(),
            sheet_branch: self.sheet_branch.zeros_like(),
            lyrics_branch: self.lyrics_branch.zeros_like(),
            common_dim: self.common_dim,
            temperature: self.temperature,
        }
    }

    pub fn num_params(&self) -> usize {
        Modality::ALL.iter().map(|&m| self.branch(m).num_params()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::shape("GeneratorParams::set_flat", self.num_params(), flat.len()));
        }
        let mut offset = 0;
        for m in Modality::ALL {
            let b = self.branch_mut(m);
            let n = b.num_params();
            b.set_flat(&flat[offset..offset + n])?;
            offset += n;
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut t = self.audio_branch.tensors();
        t.extend(self.sheet_branch.tensors());
        t.extend(self.lyrics_branch.tensors());
        t
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t = self.audio_branch.tensors_mut();
        t.extend(self.sheet_branch.tensors_mut());
        t.extend(self.lyrics_branch.tensors_mut());
        t
    }

    pub fn is_finite(&self) -> bool {
        Modality::ALL.iter().all(|&m| self.branch(m).is_finite())
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::arg("temperature must be positive and finite"));
    }
    Ok(())
}

/// Forward pass of one modality's branch.
pub fn embed(params: &GeneratorParams, feature: &[f64], modality: Modality) -> Result<Vec<f64>> {
    params.branch(modality).forward(feature)
}

/// Embeds every row of `features`.
pub fn embed_rows(params: &GeneratorParams, features: &DenseMatrix, modality: Modality) -> Result<DenseMatrix> {
    let mut values = Vec::with_capacity(features.rows() * params.common_dim);
    for row in features.iter_rows() {
        values.extend(embed(params, row, modality)?);
    }
    DenseMatrix::new(features.rows(), params.common_dim, values)
}

/// `softmax(embedding / temperature)`.
pub fn distribution_head(embedding: &[f64], temperature: f64) -> Result<Vec<f64>> {
    check_temperature(temperature)?;
    let scaled: Vec<f64> = embedding.iter().map(|v| v / temperature).collect();
    softmax(&scaled)
}

/// `KL(h(z) || f(x)) + KL(h(z) || g(y))` over the distribution heads.
pub fn teacher_student_loss(params: &GeneratorParams, x: &[f64], y: &[f64], z: &[f64]) -> Result<f64> {
    let t = params.temperature;
    let h = distribution_head(&embed(params, z, Modality::Lyrics)?, t)?;
    let f = distribution_head(&embed(params, x, Modality::Audio)?, t)?;
    let g = distribution_head(&embed(params, y, Modality::Sheet)?, t)?;
    Ok(kl_unchecked(&h, &f) + kl_unchecked(&h, &g))
}

/// KL of a fixed teacher distribution against a student's logits, with the
/// gradient w.r.t. those logits. Exact away from the `1e-12` clamp boundary.
pub fn kl_to_student_logits(teacher: &[f64], student_logits: &[f64], temperature: f64) -> Result<(f64, Vec<f64>)> {
    let student = distribution_head(student_logits, temperature)?;
    if teacher.len() != student.len() {
        return Err(Error::shape("teacher/student width", teacher.len(), student.len()));
    }
    let loss = kl_unchecked(teacher, &student);
    let active_mass: f64 = teacher
        .iter()
        .zip(&student)
        .filter(|(_, &s)| s >= KL_CLAMP)
        .map(|(h, _)| h)
        .sum();
    let grad = teacher
        .iter()
        .zip(&student)
        .map(|(&h, &s)| {
            let own = if s >= KL_CLAMP { h } else { 0.0 };
            (s * active_mass - own) / temperature
        })
        .collect();
    Ok((loss, grad))
}

/// Teacher-student loss and its gradient. The lyrics teacher is a constant
/// target, so the lyrics branch gradient is identically zero.
pub fn teacher_student_loss_grad(
    params: &GeneratorParams,
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> Result<(f64, GeneratorParams)> {
    let t = params.temperature;
    let teacher = distribution_head(&embed(params, z, Modality::Lyrics)?, t)?;
    let mut grads = params.zeros_like();
    let mut total = 0.0;
    for (modality, feature) in [(Modality::Audio, x), (Modality::Sheet, y)] {
        let branch = params.branch(modality);
        let trace = branch.forward_trace(feature)?;
        let (loss, upstream) = kl_to_student_logits(&teacher, trace.output(), t)?;
        total += loss;
        branch.backward_into(&trace, &upstream, grads.branch_mut(modality), false)?;
    }
    Ok((total, grads))
}

/// `J = (fa + gs) / 2`.
pub fn joint_embed(fa: &[f64], gs: &[f64]) -> Result<Vec<f64>> {
    if fa.len() != gs.len() {
        return Err(Error::shape("joint_embed", fa.len(), gs.len()));
    }
    Ok(fa.iter().zip(gs).map(|(a, b)| 0.5 * (a + b)).collect())
}

/// Probabilities over candidate pairs for one lyrics query.
#[derive(Debug, Clone, PartialEq)]
pub struct PairDistribution {
    pub candidates: Vec<(usize, usize)>,
    pub probabilities: Vec<f64>,
}

/// `p_m = softmax_m(-||query - J_m||^2)` over the rows of `joints`.
pub fn pair_probability(
    query_embedding: &[f64],
    candidates: &[(usize, usize)],
    joints: &DenseMatrix,
) -> Result<PairDistribution> {
    let logits = pair_logits(query_embedding, joints)?;
    if candidates.len() != joints.rows() {
        return Err(Error::shape(
            "pair_probability candidates",
            joints.rows(),
            candidates.len(),
        ));
    }
    Ok(PairDistribution {
        candidates: candidates.to_vec(),
        probabilities: softmax(&logits)?,
    })
}

fn pair_logits(query: &[f64], joints: &DenseMatrix) -> Result<Vec<f64>> {
    if joints.rows() == 0 {
        return Err(Error::arg("pair_probability needs at least one candidate"));
    }
    if joints.cols() != query.len() {
        return Err(Error::shape("pair_probability", query.len(), joints.cols()));
    }
    Ok(joints.iter_rows().map(|j| -squared_distance(query, j)).collect())
}

/// `log p_chosen` together with its gradient w.r.t. the query embedding and
/// every joint embedding.
pub fn log_pair_probability_grad(
    query: &[f64],
    joints: &DenseMatrix,
    chosen: usize,
) -> Result<(f64, Vec<f64>, DenseMatrix)> {
    let logits = pair_logits(query, joints)?;
    if chosen >= logits.len() {
        return Err(Error::arg("chosen candidate out of range"));
    }
    let lse = log_sum_exp(&logits);
    let probs: Vec<f64> = logits.iter().map(|&l| libm::exp(l - lse)).collect();
    let mut d_query = vec![0.0; query.len()];
    let mut d_joints = DenseMatrix::zeros(joints.rows(), joints.cols());
    for (m, joint) in joints.iter_rows().enumerate() {
        // d(-||q - J||^2)/dJ = 2 (q - J); dq is the negative of that.
        let weight = if m == chosen { 1.0 } else { 0.0 } - probs[m];
        if weight == 0.0 {
            continue;
        }
        let row = d_joints.row_mut(m);
        for ((r, &q), &j) in row.iter_mut().zip(query).zip(joint) {
            *r = 2.0 * weight * (q - j);
        }
        axpy(-1.0, d_joints.row(m), &mut d_query);
    }
    Ok((logits[chosen] - lse, d_query, d_joints))
}

/// A categorical draw from a [`PairDistribution`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledPair {
    pub index: usize,
    pub audio_index: usize,
    pub sheet_index: usize,
    pub log_prob: f64,
}

pub fn sample_pair<R: Rng + ?Sized>(dist: &PairDistribution, rng: &mut R) -> Result<SampledPair> {
    if dist.probabilities.is_empty() || dist.probabilities.len() != dist.candidates.len() {
        return Err(Error::arg("invalid pair distribution"));
    }
    let total: f64 = dist.probabilities.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut cum = 0.0;
    let mut index = dist.probabilities.len() - 1;
    for (i, &p) in dist.probabilities.iter().enumerate() {
        cum += p;
        if p > 0.0 && u < cum {
            index = i;
            break;
        }
    }
    let (audio_index, sheet_index) = dist.candidates[index];
    Ok(SampledPair {
        index,
        audio_index,
        sheet_index,
        log_prob: libm::log(dist.probabilities[index]),
    })
}

/// How the per-batch candidate pool for the pair distribution is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidatePolicy {
    /// Batches up to this size use every (audio, sheet) combination.
    pub full_pool_max_batch: usize,
    /// Larger batches draw this many distinct combinations uniformly.
    pub sampled_pool_size: usize,
}

impl Default for CandidatePolicy {
    fn default() -> Self {
        Self {
            full_pool_max_batch: 16,
            sampled_pool_size: 256,
        }
    }
}

impl CandidatePolicy {
    /// Candidate pool as pairs of positions within a batch of `batch_size`.
    pub fn pool<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R) -> Vec<(usize, usize)> {
        let all = batch_size * batch_size;
        if batch_size <= self.full_pool_max_batch || self.sampled_pool_size >= all {
            return (0..batch_size)
                .flat_map(|a| (0..batch_size).map(move |s| (a, s)))
                .collect();
        }
        let mut seen = BTreeSet::new();
        let mut pool = Vec::with_capacity(self.sampled_pool_size);
        while pool.len() < self.sampled_pool_size {
            let c = rng.random_range(0..all);
            if seen.insert(c) {
                pool.push((c / batch_size, c % batch_size));
            }
        }
        pool
    }
}

/// Forward traces for a set of inputs through one branch, with per-item
/// output gradient accumulators for a later backward pass.
pub(crate) struct BranchBatch {
    pub modality: Modality,
    pub traces: Vec<MlpTrace>,
    pub upstream: Vec<Vec<f64>>,
}

impl BranchBatch {
    pub fn forward<'a>(
        params: &GeneratorParams,
        modality: Modality,
        inputs: impl Iterator<Item = &'a [f64]>,
    ) -> Result<Self> {
        let branch = params.branch(modality);
        let traces = inputs.map(|x| branch.forward_trace(x)).collect::<Result<Vec<_>>>()?;
        let upstream = vec![vec![0.0; params.common_dim]; traces.len()];
        Ok(Self {
            modality,
            traces,
            upstream,
        })
    }

    pub fn output(&self, i: usize) -> &[f64] {
        self.traces[i].output()
    }

    pub fn backward(&self, params: &GeneratorParams, grads: &mut GeneratorParams) -> Result<()> {
        let branch = params.branch(self.modality);
        let g = grads.branch_mut(self.modality);
        for (trace, up) in self.traces.iter().zip(&self.upstream) {
            if up.iter().any(|&v| v != 0.0) {
                branch.backward_into(trace, up, g, false)?;
            }
        }
        Ok(())
    }
}

/// `log p_theta(chosen | z)` over a candidate list of raw (audio, sheet)
/// features, with its gradient w.r.t. all three branches.
pub fn log_pair_probability_and_grad(
    params: &GeneratorParams,
    z: &[f64],
    audio: &[&[f64]],
    sheet: &[&[f64]],
    chosen: usize,
) -> Result<(f64, GeneratorParams)> {
    if audio.len() != sheet.len() {
        return Err(Error::shape("candidate lists", audio.len(), sheet.len()));
    }
    let mut lyr = BranchBatch::forward(params, Modality::Lyrics, core::iter::once(z))?;
    let mut aud = BranchBatch::forward(params, Modality::Audio, audio.iter().copied())?;
    let mut sht = BranchBatch::forward(params, Modality::Sheet, sheet.iter().copied())?;
    let mut joints = DenseMatrix::zeros(audio.len(), params.common_dim);
    for m in 0..audio.len() {
        joints
            .row_mut(m)
            .copy_from_slice(&joint_embed(aud.output(m), sht.output(m))?);
    }
    let (lp, dq, dj) = log_pair_probability_grad(lyr.output(0), &joints, chosen)?;
    lyr.upstream[0] = dq;
    for m in 0..audio.len() {
        axpy(0.5, dj.row(m), &mut aud.upstream[m]);
        axpy(0.5, dj.row(m), &mut sht.upstream[m]);
    }
    let mut grads = params.zeros_like();
    for b in [&lyr, &aud, &sht] {
        b.backward(params, &mut grads)?;
    }
    Ok((lp, grads))
}
