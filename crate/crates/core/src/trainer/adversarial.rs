use alloc::vec::Vec;
use rand::Rng;

use crate::data::{Modality, TripletDataset};
use crate::discriminator::{
    log_term, log_term_slope, prob, relevance, relevance_accumulate, DiscriminatorParams, PairSource,
};
use crate::error::Result;
use crate::generator::{
    distribution_head, kl_to_student_logits, log_pair_probability_grad, sample_pair, BranchBatch, CandidatePolicy,
    GeneratorParams, PairDistribution,
};
use crate::groundtruth::PairSet;
use crate::numkit::prob::log_one_minus_sigmoid;
use crate::numkit::{axpy, log_sum_exp, DenseMatrix, OptState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DStepStats {
    /// Negated discriminator objective, averaged over the batch.
    pub loss: f64,
    pub d_output_min: f64,
    pub d_output_max: f64,
    pub phi_min: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GStepStats {
    /// `w_kl * kl_loss + w_adv * adv_loss`
    pub total: f64,
    pub kl_loss: f64,
    /// Mean `log(1 - D)` over the sampled pairs.
    pub adv_loss: f64,
    pub mean_reward: f64,
    pub d_output_min: f64,
    pub d_output_max: f64,
    pub phi_min: f64,
}

struct Extremes {
    d_min: f64,
    d_max: f64,
    phi_min: f64,
}

impl Extremes {
    fn new() -> Self {
        Self {
            d_min: f64::INFINITY,
            d_max: f64::NEG_INFINITY,
            phi_min: f64::INFINITY,
        }
    }

    fn observe(&mut self, phi: f64) {
        let d = prob(phi);
        self.d_min = self.d_min.min(d);
        self.d_max = self.d_max.max(d);
        self.phi_min = self.phi_min.min(phi);
    }
}

fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

fn pool_joints<'a>(
    pool: &[(usize, usize)],
    audio: impl Fn(usize) -> &'a [f64],
    sheet: impl Fn(usize) -> &'a [f64],
    dim: usize,
) -> DenseMatrix {
    let mut joints = DenseMatrix::zeros(pool.len(), dim);
    for (m, &(a, s)) in pool.iter().enumerate() {
        for ((j, &x), &y) in joints.row_mut(m).iter_mut().zip(audio(a)).zip(sheet(s)) {
            *j = 0.5 * (x + y);
        }
    }
    joints
}

/// Draws one pool position from `softmax(-||query - J_m||^2)`.
fn draw<R: Rng + ?Sized>(query: &[f64], joints: &DenseMatrix, pool: &[(usize, usize)], rng: &mut R) -> Result<usize> {
    let logits: Vec<f64> = joints
        .iter_rows()
        .map(|j| -crate::numkit::squared_distance(query, j))
        .collect();
    let lse = log_sum_exp(&logits);
    let dist = PairDistribution {
        candidates: pool.to_vec(),
        probabilities: logits.iter().map(|l| libm::exp(l - lse)).collect(),
    };
    Ok(sample_pair(&dist, rng)?.index)
}

fn draw_partner<R: Rng + ?Sized>(pairs: &PairSet, index: usize, rng: &mut R) -> Result<usize> {
    let partners = pairs.partners(index)?;
    Ok(partners[rng.random_range(0..partners.len())])
}

/// One discriminator update: ascend `log D(true | q) + log(1 - D(gen | q))`
/// averaged over the batch's lyrics queries.
///
/// The generated pair for query `i` is drawn from the generator's pair
/// distribution over the batch candidate pool; the ground-truth pair is
/// `(i, j)` with `j` uniform among `i`'s partners. The ground-truth term is
/// scored against a second, independently drawn partner of `i`.
#[allow(clippy::too_many_arguments)]
pub fn train_step_d<R: Rng + ?Sized>(
    gen: &GeneratorParams,
    disc: &mut DiscriminatorParams,
    opt: &mut OptState,
    data: &TripletDataset,
    batch: &[usize],
    pairs: &PairSet,
    policy: &CandidatePolicy,
    rng: &mut R,
) -> Result<DStepStats> {
    let b = batch.len();
    let rows = |m: Modality| data.table(m).vectors();
    let embed = |m: Modality, i: usize| gen.branch(m).forward(rows(m).row(i));
    let audio: Vec<Vec<f64>> = batch
        .iter()
        .map(|&i| embed(Modality::Audio, i))
        .collect::<Result<_>>()?;
    let sheet: Vec<Vec<f64>> = batch
        .iter()
        .map(|&i| embed(Modality::Sheet, i))
        .collect::<Result<_>>()?;
    let lyrics: Vec<Vec<f64>> = batch
        .iter()
        .map(|&i| embed(Modality::Lyrics, i))
        .collect::<Result<_>>()?;

    let pool = policy.pool(b, rng);
    let joints = pool_joints(&pool, |a| &audio[a], |s| &sheet[s], gen.common_dim);

    let mut grads = disc.zeros_like();
    let mut objective = 0.0;
    let mut ext = Extremes::new();
    let inv_b = 1.0 / b as f64;
    for (pos, &idx) in batch.iter().enumerate() {
        let (ga, gs) = pool[draw(&lyrics[pos], &joints, &pool, rng)?];
        let j = draw_partner(pairs, idx, rng)?;
        let j_anchor = draw_partner(pairs, idx, rng)?;
        let p_true = concat(&audio[pos], &embed(Modality::Sheet, j)?);
        let p_anchor = concat(&audio[pos], &embed(Modality::Sheet, j_anchor)?);
        let p_gen = concat(&audio[ga], &sheet[gs]);
        let q = rows(Modality::Lyrics).row(idx);

        for (source, anchor, eval) in [
            (PairSource::Generated, &p_true, &p_gen),
            (PairSource::GroundTruth, &p_anchor, &p_true),
        ] {
            let (phi, _) = relevance_accumulate(
                disc,
                q,
                anchor,
                eval,
                |phi| -inv_b * log_term_slope(phi, source),
                &mut grads,
            )?;
            objective += log_term(phi, source);
            ext.observe(phi);
        }
    }
    opt.step(disc.tensors_mut(), grads.tensors())?;
    Ok(DStepStats {
        loss: -objective * inv_b,
        d_output_min: ext.d_min,
        d_output_max: ext.d_max,
        phi_min: ext.phi_min,
    })
}

/// One generator update: `w_kl` times the teacher-student loss plus `w_adv`
/// times a policy-gradient surrogate. Each lyrics query samples a pair,
/// receives reward `-log(1 - D(pair | q))`, and the batch-mean reward is
/// subtracted before weighting `grad log p_theta(pair | z)`.
#[allow(clippy::too_many_arguments)]
pub fn train_step_g<R: Rng + ?Sized>(
    gen: &mut GeneratorParams,
    disc: &DiscriminatorParams,
    opt: &mut OptState,
    data: &TripletDataset,
    batch: &[usize],
    pairs: &PairSet,
    policy: &CandidatePolicy,
    w_kl: f64,
    w_adv: f64,
    rng: &mut R,
) -> Result<GStepStats> {
    let b = batch.len();
    let inv_b = 1.0 / b as f64;
    let rows = |m: Modality| data.table(m).vectors();
    let mut aud = BranchBatch::forward(
        gen,
        Modality::Audio,
        batch.iter().map(|&i| rows(Modality::Audio).row(i)),
    )?;
    let mut sht = BranchBatch::forward(
        gen,
        Modality::Sheet,
        batch.iter().map(|&i| rows(Modality::Sheet).row(i)),
    )?;
    let mut lyr = BranchBatch::forward(
        gen,
        Modality::Lyrics,
        batch.iter().map(|&i| rows(Modality::Lyrics).row(i)),
    )?;
    let t = gen.temperature;

    let mut kl_sum = 0.0;
    for pos in 0..b {
        let teacher = distribution_head(lyr.output(pos), t)?;
        let (la, ga) = kl_to_student_logits(&teacher, aud.output(pos), t)?;
        let (ls, gs) = kl_to_student_logits(&teacher, sht.output(pos), t)?;
        kl_sum += la + ls;
        if w_kl > 0.0 {
            axpy(w_kl * inv_b, &ga, &mut aud.upstream[pos]);
            axpy(w_kl * inv_b, &gs, &mut sht.upstream[pos]);
        }
    }

    let pool = policy.pool(b, rng);
    let joints = pool_joints(&pool, |a| aud.output(a), |s| sht.output(s), gen.common_dim);
    let mut chosen = Vec::with_capacity(b);
    let mut rewards = Vec::with_capacity(b);
    let mut adv_sum = 0.0;
    let mut ext = Extremes::new();
    for (pos, &idx) in batch.iter().enumerate() {
        let m = draw(lyr.output(pos), &joints, &pool, rng)?;
        let (ga, gs) = pool[m];
        let j = draw_partner(pairs, idx, rng)?;
        let partner = gen.branch(Modality::Sheet).forward(rows(Modality::Sheet).row(j))?;
        let p_true = concat(aud.output(pos), &partner);
        let p_gen = concat(aud.output(ga), sht.output(gs));
        let phi = relevance(disc, rows(Modality::Lyrics).row(idx), &p_true, &p_gen)?;
        ext.observe(phi);
        let log_one_minus_d = log_one_minus_sigmoid(phi);
        adv_sum += log_one_minus_d;
        rewards.push(-log_one_minus_d);
        chosen.push(m);
    }
    let mean_reward = rewards.iter().sum::<f64>() * inv_b;

    if w_adv > 0.0 {
        for pos in 0..b {
            let advantage = rewards[pos] - mean_reward;
            if advantage == 0.0 {
                continue;
            }
            let (_, d_query, d_joints) = log_pair_probability_grad(lyr.output(pos), &joints, chosen[pos])?;
            // Descend -advantage * log p.
            let c = -w_adv * advantage * inv_b;
            axpy(c, &d_query, &mut lyr.upstream[pos]);
            for (m, &(a, s)) in pool.iter().enumerate() {
                let row = d_joints.row(m);
                axpy(0.5 * c, row, &mut aud.upstream[a]);
                axpy(0.5 * c, row, &mut sht.upstream[s]);
            }
        }
    }

    let mut grads = gen.zeros_like();
    for branch in [&aud, &sht, &lyr] {
        branch.backward(gen, &mut grads)?;
    }
    opt.step(gen.tensors_mut(), grads.tensors())?;

    let kl_loss = kl_sum * inv_b;
    let adv_loss = adv_sum * inv_b;
    Ok(GStepStats {
        total: w_kl * kl_loss + w_adv * adv_loss,
        kl_loss,
        adv_loss,
        mean_reward,
        d_output_min: ext.d_min,
        d_output_max: ext.d_max,
        phi_min: ext.phi_min,
    })
}
