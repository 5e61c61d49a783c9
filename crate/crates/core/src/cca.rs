//! Regularized linear canonical correlation analysis between the audio and
//! sheet-music views.

use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::linalg::{svd, sym_eigen};
use crate::numkit::{axpy, DenseMatrix};

pub const DEFAULT_EPSILON: f64 = 1e-6;
pub const DEFAULT_MAX_COMPONENTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum View {
    Audio,
    Sheet,
}

/// A fitted CCA model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaModel {
    pub audio_mean: Vec<f64>,
    pub sheet_mean: Vec<f64>,
    /// `audio_dim x k`
    pub audio_projection: DenseMatrix,
    /// `sheet_dim x k`
    pub sheet_projection: DenseMatrix,
    /// Descending, clamped to `[0, 1]`.
    pub correlations: Vec<f64>,
    pub epsilon: f64,
}

/// `k = min(32, input dims)`, further capped by `n - 1`.
pub fn default_components(audio_dim: usize, sheet_dim: usize, n: usize) -> usize {
    DEFAULT_MAX_COMPONENTS
        .min(audio_dim)
        .min(sheet_dim)
        .min(n.saturating_sub(1))
        .max(1)
}

/// Fits CCA by mean-centering, whitening each view with
/// `(C + eps I)^{-1/2}`, and taking the SVD of the whitened
/// cross-covariance.
pub fn fit_cca(audio_view: &DenseMatrix, sheet_view: &DenseMatrix, k: usize, epsilon: f64) -> Result<CcaModel> {
    let n = audio_view.rows();
    if sheet_view.rows() != n {
        return Err(Error::shape("fit_cca paired rows", n, sheet_view.rows()));
    }
    if n < 2 {
        return Err(Error::arg("fit_cca needs at least two samples"));
    }
    let (da, ds) = (audio_view.cols(), sheet_view.cols());
    let max_k = da.min(ds).min(n - 1);
    if k == 0 || k > max_k {
        return Err(Error::arg(alloc::format!(
            "k = {k} must be in 1..={max_k} (min of view dims and n - 1)"
        )));
    }
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::arg("epsilon must be finite and non-negative"));
    }
    if !audio_view.is_finite() || !sheet_view.is_finite() {
        return Err(Error::data("fit_cca input contains non-finite values"));
    }

    let audio_mean = audio_view.column_means();
    let sheet_mean = sheet_view.column_means();
    let xc = centered(audio_view, &audio_mean);
    let yc = centered(sheet_view, &sheet_mean);
    let denom = (n - 1) as f64;

    let mut cxx = gram(&xc, &xc, denom);
    let mut cyy = gram(&yc, &yc, denom);
    let cxy = gram(&xc, &yc, denom);
    for i in 0..da {
        cxx.set(i, i, cxx.get(i, i) + epsilon);
    }
    for i in 0..ds {
        cyy.set(i, i, cyy.get(i, i) + epsilon);
    }
    let wx = inverse_sqrt(&cxx, "audio")?;
    let wy = inverse_sqrt(&cyy, "sheet")?;
    let whitened = wx.matmul(&cxy)?.matmul(&wy)?;
    let dec = svd(&whitened)?;

    let mut audio_projection = DenseMatrix::zeros(da, k);
    let mut sheet_projection = DenseMatrix::zeros(ds, k);
    let a_full = wx.matmul(&dec.u)?;
    let b_full = wy.matmul(&dec.v)?;
    for j in 0..k {
        // Largest-magnitude audio entry positive; the sheet column follows
        // so the pair keeps a positive correlation.
        let mut pivot = 0.0f64;
        for r in 0..da {
            let x = a_full.get(r, j);
            if x.abs() > pivot.abs() {
                pivot = x;
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for r in 0..da {
            audio_projection.set(r, j, sign * a_full.get(r, j));
        }
        for r in 0..ds {
            sheet_projection.set(r, j, sign * b_full.get(r, j));
        }
    }
    let correlations = dec.singular_values[..k].iter().map(|s| s.clamp(0.0, 1.0)).collect();

    Ok(CcaModel {
        audio_mean,
        sheet_mean,
        audio_projection,
        sheet_projection,
        correlations,
        epsilon,
    })
}

fn centered(m: &DenseMatrix, mean: &[f64]) -> DenseMatrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        axpy(-1.0, mean, out.row_mut(r));
    }
    out
}

/// `a^T b / denom`
fn gram(a: &DenseMatrix, b: &DenseMatrix, denom: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(a.cols(), b.cols());
    for (ra, rb) in a.iter_rows().zip(b.iter_rows()) {
        for (i, &x) in ra.iter().enumerate() {
            if x != 0.0 {
                axpy(x, rb, out.row_mut(i));
            }
        }
    }
    out.values_mut().iter_mut().for_each(|v| *v /= denom);
    out
}

fn inverse_sqrt(c: &DenseMatrix, view: &str) -> Result<DenseMatrix> {
    let (vals, vecs) = sym_eigen(c)?;
    let n = c.rows();
    let floor = vals.first().copied().unwrap_or(0.0).abs() * 1e-15;
    let mut scaled = vecs.clone();
    for (j, &lambda) in vals.iter().enumerate() {
        if !(lambda > floor && lambda > 0.0) {
            return Err(Error::data(alloc::format!(
                "{view} covariance is singular; increase epsilon"
            )));
        }
        let f = 1.0 / libm::sqrt(lambda);
        for r in 0..n {
            scaled.set(r, j, scaled.get(r, j) * f);
        }
    }
    scaled.matmul(&vecs.transpose())
}

impl CcaModel {
    pub fn components(&self) -> usize {
        self.correlations.len()
    }

    pub fn input_dim(&self, view: View) -> usize {
        match view {
            View::Audio => self.audio_mean.len(),
            View::Sheet => self.sheet_mean.len(),
        }
    }

    fn parts(&self, view: View) -> (&[f64], &DenseMatrix) {
        match view {
            View::Audio => (&self.audio_mean, &self.audio_projection),
            View::Sheet => (&self.sheet_mean, &self.sheet_projection),
        }
    }

    /// Projects every row of `features` into CCA space.
    pub fn project_rows(&self, features: &DenseMatrix, view: View) -> Result<DenseMatrix> {
        let mut values = Vec::with_capacity(features.rows() * self.components());
        for row in features.iter_rows() {
            values.extend(project(self, row, view)?);
        }
        DenseMatrix::new(features.rows(), self.components(), values)
    }
}

/// `(feature - mean) * projection` for the chosen view.
pub fn project(model: &CcaModel, feature: &[f64], view: View) -> Result<Vec<f64>> {
    let (mean, proj) = model.parts(view);
    if feature.len() != mean.len() {
        return Err(Error::shape("CCA project", mean.len(), feature.len()));
    }
    let mut out = vec![0.0; proj.cols()];
    for ((&x, &m), row) in feature.iter().zip(mean).zip(proj.iter_rows()) {
        let c = x - m;
        if c != 0.0 {
            axpy(c, row, &mut out);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_view(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
        DenseMatrix::new(n, d, v).unwrap()
    }

    #[test]
    fn identical_views_are_perfectly_correlated() {
        let x = random_view(200, 3, 1);
        let m = fit_cca(&x, &x, 1, DEFAULT_EPSILON).unwrap();
        assert!((m.correlations[0] - 1.0).abs() < 1e-6, "{:?}", m.correlations);
    }

    #[test]
    fn negated_view_still_correlates_fully() {
        let x = random_view(200, 3, 2);
        let mut y = x.clone();
        y.values_mut().iter_mut().for_each(|v| *v = -*v);
        let m = fit_cca(&x, &y, 2, DEFAULT_EPSILON).unwrap();
        assert!((m.correlations[0] - 1.0).abs() < 1e-6);
        assert!((m.correlations[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_k_and_shapes() {
        let x = random_view(10, 3, 3);
        let y = random_view(10, 2, 4);
        assert!(matches!(fit_cca(&x, &y, 3, 1e-6), Err(Error::Argument(_))));
        assert!(matches!(fit_cca(&x, &y, 0, 1e-6), Err(Error::Argument(_))));
        let short = random_view(9, 2, 5);
        assert!(fit_cca(&x, &short, 1, 1e-6).is_err());
        let one = random_view(1, 2, 6);
        assert!(fit_cca(&one, &one, 1, 1e-6).is_err());
    }

    #[test]
    fn projecting_the_mean_gives_zero() {
        let x = random_view(50, 4, 7);
        let y = random_view(50, 3, 8);
        let m = fit_cca(&x, &y, 2, DEFAULT_EPSILON).unwrap();
        let z = project(&m, &m.audio_mean.clone(), View::Audio).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        assert!(project(&m, &[0.0; 2], View::Sheet).is_err());
    }

    #[test]
    fn largest_audio_loading_is_positive() {
        let x = random_view(80, 4, 9);
        let y = random_view(80, 4, 10);
        let m = fit_cca(&x, &y, 3, DEFAULT_EPSILON).unwrap();
        for j in 0..3 {
            let col = m.audio_projection.column(j);
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(pivot > 0.0);
        }
    }
}
