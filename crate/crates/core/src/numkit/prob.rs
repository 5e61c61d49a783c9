use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Lower clamp applied to the second KL argument.
pub const KL_CLAMP: f64 = 1e-12;
const NORMALIZATION_TOL: f64 = 1e-6;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::arg("softmax of an empty vector"));
    }
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::data("softmax input contains non-finite values"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&v| libm::exp(v - max)).collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    Ok(out)
}

/// `log Σ exp(v)`, stable for large magnitudes.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = values.iter().map(|&v| libm::exp(v - max)).sum();
    max + libm::log(s)
}

/// `Σ p log(p / max(q, 1e-12))`, with `0 log 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::shape("kl_divergence", p.len(), q.len()));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = p
        .iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (libm::log(pi) - libm::log(qi.max(KL_CLAMP))))
        .sum();
    // Rounding can leave tiny negatives when p == q.
    kl.max(0.0)
}

fn check_distribution(p: &[f64], name: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::arg(alloc::format!("{name} is empty")));
    }
    if p.iter().any(|&v| !(0.0..=1.0 + NORMALIZATION_TOL).contains(&v)) {
        return Err(Error::arg(alloc::format!("{name} has entries outside [0, 1]")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::arg(alloc::format!("{name} sums to {sum}, not 1")));
    }
    Ok(())
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * libm::log(v)).sum::<f64>()
}

/// `exp(x) / (1 + exp(x))` without overflow.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// `log(sigmoid(x))`.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -libm::log1p(libm::exp(-x))
    } else {
        x - libm::log1p(libm::exp(x))
    }
}

/// `log(1 - sigmoid(x))`.
#[inline]
pub fn log_one_minus_sigmoid(x: f64) -> f64 {
    log_sigmoid(-x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::LN_2;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[LN_2, 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15 && (p[1] - 1.0 / 3.0).abs() < 1e-15);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
        assert!(matches!(softmax(&[]), Err(Error::Argument(_))));
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let v = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - LN_2).abs() < 1e-15);
        // 0.9 ln 1.8 + 0.1 ln 0.2 versus 0.5 ln(5/9) + 0.5 ln 5
        let pq = kl_divergence(&[0.9, 0.1], &[0.5, 0.5]).unwrap();
        let qp = kl_divergence(&[0.5, 0.5], &[0.9, 0.1]).unwrap();
        let pq_ref = 0.9 * libm::log(1.8) + 0.1 * libm::log(0.2);
        let qp_ref = 0.5 * libm::log(5.0 / 9.0) + 0.5 * libm::log(5.0);
        assert!((pq - pq_ref).abs() < 1e-14 && (qp - qp_ref).abs() < 1e-14);
        assert!((pq - qp).abs() > 0.1);
    }

    #[test]
    fn kl_rejects_bad_input() {
        assert!(kl_divergence(&[0.5, 0.5], &[1.0]).is_err());
        assert!(matches!(
            kl_divergence(&[0.7, 0.7], &[0.5, 0.5]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        let e = core::f64::consts::E;
        assert!((sigmoid(1.0) - e / (1.0 + e)).abs() < 1e-15);
        assert!((sigmoid(1.0) - 0.731_058_578_630_004_9).abs() < 1e-12);
        assert!(sigmoid(1e6) <= 1.0 && sigmoid(1e6) > 0.999_999);
        assert!(sigmoid(-1e6) >= 0.0);
        assert!((log_sigmoid(-800.0) + 800.0).abs() < 1e-9);
        assert!((log_one_minus_sigmoid(0.0) + LN_2).abs() < 1e-15);
    }
}
