use alloc::vec::Vec;
use rand::Rng;

use crate::data::{Modality, TripletDataset};
use crate::error::{Error, Result};
use crate::generator::{distribution_head, joint_embed, BranchBatch, GeneratorParams};
use crate::groundtruth::PairSet;
use crate::numkit::prob::kl_unchecked;
use crate::numkit::{axpy, squared_distance, OptState};

/// `max(0, alpha + ||a - p||^2 - ||a - n||^2)`.
pub fn triplet_loss(anchor: &[f64], positive: &[f64], negative: &[f64], alpha: f64) -> f64 {
    (alpha + squared_distance(anchor, positive) - squared_distance(anchor, negative)).max(0.0)
}

/// Hinge gradients w.r.t. anchor, positive and negative (zero when inactive).
fn triplet_grads(anchor: &[f64], positive: &[f64], negative: &[f64], alpha: f64) -> (f64, Option<[Vec<f64>; 3]>) {
    let pre = alpha + squared_distance(anchor, positive) - squared_distance(anchor, negative);
    if pre <= 0.0 {
        return (0.0, None);
    }
    let da = positive.iter().zip(negative).map(|(p, n)| 2.0 * (n - p)).collect();
    let dp = anchor.iter().zip(positive).map(|(a, p)| -2.0 * (a - p)).collect();
    let dn = anchor.iter().zip(negative).map(|(a, n)| 2.0 * (a - n)).collect();
    (pre, Some([da, dp, dn]))
}

/// Triplet loss with anchor `H(z)`, positive `J(F(x_pos), G(y_pos))` and
/// negative `J(F(x_neg), G(y_neg))`, with its gradient w.r.t. all branches.
pub fn triplet_loss_and_grad(
    params: &GeneratorParams,
    z: &[f64],
    x_pos: &[f64],
    y_pos: &[f64],
    x_neg: &[f64],
    y_neg: &[f64],
    alpha: f64,
) -> Result<(f64, GeneratorParams)> {
    let mut lyr = BranchBatch::forward(params, Modality::Lyrics, core::iter::once(z))?;
    let mut aud = BranchBatch::forward(params, Modality::Audio, [x_pos, x_neg].into_iter())?;
    let mut sht = BranchBatch::forward(params, Modality::Sheet, [y_pos, y_neg].into_iter())?;
    let pos = joint_embed(aud.output(0), sht.output(0))?;
    let neg = joint_embed(aud.output(1), sht.output(1))?;
    let (loss, g) = triplet_grads(lyr.output(0), &pos, &neg, alpha);
    let mut grads = params.zeros_like();
    if let Some([da, dp, dn]) = g {
        lyr.upstream[0] = da;
        for (slot, d) in [(0, &dp), (1, &dn)] {
            axpy(0.5, d, &mut aud.upstream[slot]);
            axpy(0.5, d, &mut sht.upstream[slot]);
        }
        for b in [&lyr, &aud, &sht] {
            b.backward(params, &mut grads)?;
        }
    }
    Ok((loss, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripletStepStats {
    pub triplet_loss: f64,
    /// Teacher-student loss on the batch, measured but not optimized.
    pub kl_loss: f64,
}

/// One triplet-loss step. Anchor: lyrics of item `i`; positive: `i`'s
/// audio with a uniformly drawn ground-truth sheet partner; negative: the
/// positive pair of another uniformly chosen batch item.
pub fn train_step_triplet<R: Rng + ?Sized>(
    gen: &mut GeneratorParams,
    opt: &mut OptState,
    data: &TripletDataset,
    batch: &[usize],
    pairs: &PairSet,
    alpha: f64,
    rng: &mut R,
) -> Result<TripletStepStats> {
    let b = batch.len();
    if b < 2 {
        return Err(Error::arg("triplet step needs at least two items"));
    }
    let inv_b = 1.0 / b as f64;
    let rows = |m: Modality| data.table(m).vectors();
    let partners: Vec<usize> = batch
        .iter()
        .map(|&i| {
            let p = pairs.partners(i)?;
            Ok(p[rng.random_range(0..p.len())])
        })
        .collect::<Result<_>>()?;
    let mut aud = BranchBatch::forward(
        gen,
        Modality::Audio,
        batch.iter().map(|&i| rows(Modality::Audio).row(i)),
    )?;
    let mut sht = BranchBatch::forward(
        gen,
        Modality::Sheet,
        partners.iter().map(|&j| rows(Modality::Sheet).row(j)),
    )?;
    let mut lyr = BranchBatch::forward(
        gen,
        Modality::Lyrics,
        batch.iter().map(|&i| rows(Modality::Lyrics).row(i)),
    )?;

    let joints: Vec<Vec<f64>> = (0..b)
        .map(|p| joint_embed(aud.output(p), sht.output(p)))
        .collect::<Result<_>>()?;
    let mut loss_sum = 0.0;
    for pos in 0..b {
        let mut other = rng.random_range(0..b - 1);
        if other >= pos {
            other += 1;
        }
        let (loss, g) = triplet_grads(lyr.output(pos), &joints[pos], &joints[other], alpha);
        loss_sum += loss;
        if let Some([da, dp, dn]) = g {
            axpy(inv_b, &da, &mut lyr.upstream[pos]);
            for (slot, d) in [(pos, &dp), (other, &dn)] {
                axpy(0.5 * inv_b, d, &mut aud.upstream[slot]);
                axpy(0.5 * inv_b, d, &mut sht.upstream[slot]);
            }
        }
    }

    let t = gen.temperature;
    let mut kl_sum = 0.0;
    for (pos, &i) in batch.iter().enumerate() {
        let h = distribution_head(lyr.output(pos), t)?;
        let f = distribution_head(aud.output(pos), t)?;
        let g = distribution_head(&gen.sheet_branch.forward(rows(Modality::Sheet).row(i))?, t)?;
        kl_sum += kl_unchecked(&h, &f) + kl_unchecked(&h, &g);
    }

    let mut grads = gen.zeros_like();
    for branch in [&aud, &sht, &lyr] {
        branch.backward(gen, &mut grads)?;
    }
    opt.step(gen.tensors_mut(), grads.tensors())?;
    Ok(TripletStepStats {
        triplet_loss: loss_sum * inv_b,
        kl_loss: kl_sum * inv_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_examples() {
        let a = [0.3, -0.1];
        let p = [1.0, 2.0];
        assert_eq!(triplet_loss(&a, &p, &p, 0.0), 0.0);
        let n = [0.3 + 0.7, -0.1 - 2.1];
        // |a - p|^2 = 0.49 + 4.41 = |a - n|^2
        assert!((triplet_loss(&a, &p, &n, 1.0) - 1.0).abs() < 1e-12);
    }
}
