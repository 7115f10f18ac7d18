//! Multivariate normal fit and sampling.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use super::StatsError;
use crate::rng::RngStream;

/// Relative ridge applied by [`fit_mvn_default`].
pub const DEFAULT_RELATIVE_RIDGE: f64 = 1e-6;

/// A fitted multivariate normal.
#[derive(Clone, Debug)]
pub struct MvnModel {
    pub mean: DVector<f64>,
    /// Sample covariance plus `ridge * I`.
    pub covariance: DMatrix<f64>,
    pub ridge: f64,
}

impl MvnModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Lower factor `L` with `L * L^T == covariance`. Falls back to an
    /// eigen-decomposition when the matrix is only semi-definite.
    pub fn factor(&self) -> Result<DMatrix<f64>, StatsError> {
        if let Some(chol) = self.covariance.clone().cholesky() {
            return Ok(chol.l());
        }
        let eig = self.covariance.clone().symmetric_eigen();
        let scale = self.covariance.diagonal().iter().map(|v| v.abs()).fold(0.0, f64::max);
        let floor = -1e-9 * scale.max(f64::MIN_POSITIVE);
        if eig.eigenvalues.iter().any(|&v| v < floor || !v.is_finite()) {
            return Err(StatsError::NotPositiveSemiDefinite);
        }
        let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
    }
}

/// Sample mean and (n-1)-denominator covariance, plus `ridge` on the diagonal.
pub fn fit_mvn<S: AsRef<[f64]>>(samples: &[S], ridge: f64) -> Result<MvnModel, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: samples.len() });
    }
    if !(ridge.is_finite() && ridge >= 0.0) {
        return Err(StatsError::InvalidParameter(format!("ridge must be >= 0, got {ridge}")));
    }
    let (mean, mut cov) = moments(samples)?;
    for i in 0..cov.nrows() {
        cov[(i, i)] += ridge;
    }
    let model = MvnModel { mean, covariance: cov, ridge };
    model.factor()?;
    Ok(model)
}

/// [`fit_mvn`] with ridge `1e-6 * mean diagonal variance`.
pub fn fit_mvn_default<S: AsRef<[f64]>>(samples: &[S]) -> Result<MvnModel, StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::InsufficientData { needed: 2, got: samples.len() });
    }
    let (mean, mut cov) = moments(samples)?;
    let ridge = DEFAULT_RELATIVE_RIDGE * cov.diagonal().mean();
    for i in 0..cov.nrows() {
        cov[(i, i)] += ridge;
    }
    let model = MvnModel { mean, covariance: cov, ridge };
    model.factor()?;
    Ok(model)
}

fn moments<S: AsRef<[f64]>>(samples: &[S]) -> Result<(DVector<f64>, DMatrix<f64>), StatsError> {
    let dim = samples[0].as_ref().len();
    if dim == 0 || samples.iter().any(|s| s.as_ref().len() != dim) {
        return Err(StatsError::InvalidParameter("samples must share one nonzero dimension".into()));
    }
    let n = samples.len() as f64;
    let mut mean = DVector::zeros(dim);
    for s in samples {
        for (m, x) in mean.iter_mut().zip(s.as_ref()) {
            *m += x;
        }
    }
    mean /= n;
    let mut cov = DMatrix::zeros(dim, dim);
    for s in samples {
        let s = s.as_ref();
        for i in 0..dim {
            let di = s[i] - mean[i];
            for j in 0..=i {
                cov[(i, j)] += di * (s[j] - mean[j]);
            }
        }
    }
    for i in 0..dim {
        for j in 0..=i {
            let v = cov[(i, j)] / (n - 1.0);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, cov))
}

/// `k` independent draws, each a vector of the model's dimension.
pub fn sample_mvn(model: &MvnModel, k: usize, rng: &mut RngStream) -> Result<Vec<Vec<f64>>, StatsError> {
    if k == 0 {
        return Err(StatsError::InvalidParameter("sample count must be >= 1".into()));
    }
    let factor = model.factor()?;
    let mut out = Vec::with_capacity(k);
    let mut buf = vec![0.0; model.dim()];
    for _ in 0..k {
        draw_into(model, &factor, rng, &mut buf);
        out.push(buf.clone());
    }
    Ok(out)
}

/// One draw into `out` using a precomputed factor.
pub fn draw_into(model: &MvnModel, factor: &DMatrix<f64>, rng: &mut RngStream, out: &mut [f64]) {
    let d = model.dim();
    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    for i in 0..d {
        let mut v = model.mean[i];
        for j in 0..d {
            v += factor[(i, j)] * z[j];
        }
        out[i] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_ridge_covariance() {
        let v = vec![3.0, -1.0, 2.5];
        let m = fit_mvn(&[v.clone(), v.clone(), v.clone()], 1e-6).unwrap();
        assert_eq!(m.mean.as_slice(), v.as_slice());
        assert_eq!(m.covariance, DMatrix::identity(3, 3) * 1e-6);
    }

    #[test]
    fn two_point_hand_arithmetic() {
        let m = fit_mvn(&[vec![0.0, 0.0], vec![2.0, 2.0]], 0.0).unwrap();
        assert_eq!(m.mean.as_slice(), &[1.0, 1.0]);
        assert_eq!(m.covariance, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            fit_mvn(&[vec![1.0]], 0.0),
            Err(StatsError::InsufficientData { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn zero_covariance_draws_equal_mean() {
        let m = fit_mvn(&[vec![4.0, 5.0], vec![4.0, 5.0]], 0.0).unwrap();
        let mut rng = RngStream::from_seed(3);
        for d in sample_mvn(&m, 50, &mut rng).unwrap() {
            assert_eq!(d, vec![4.0, 5.0]);
        }
    }

    #[test]
    fn indefinite_rejected() {
        let m = MvnModel {
            mean: DVector::zeros(2),
            covariance: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
            ridge: 0.0,
        };
        assert!(matches!(sample_mvn(&m, 1, &mut RngStream::from_seed(1)), Err(StatsError::NotPositiveSemiDefinite)));
    }

    #[test]
    fn sample_covariance_matches_model() {
        let model = MvnModel {
            mean: DVector::from_vec(vec![10.0, -5.0]),
            covariance: DMatrix::from_row_slice(2, 2, &[4.0, 1.2, 1.2, 1.0]),
            ridge: 0.0,
        };
        let mut rng = RngStream::from_seed(21).child("mvn");
        let draws = sample_mvn(&model, 1000, &mut rng).unwrap();
        let fit = fit_mvn(&draws, 0.0).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let scale = (model.covariance[(i, i)] * model.covariance[(j, j)]).sqrt();
                let err = (fit.covariance[(i, j)] - model.covariance[(i, j)]).abs() / scale;
                assert!(err <= 0.2, "entry ({i},{j}) off by {err}");
            }
            // mean within 3 standard errors
            let se = (model.covariance[(i, i)] / 1000.0).sqrt();
            assert!((fit.mean[i] - model.mean[i]).abs() < 3.0 * se);
        }
    }

    #[test]
    fn symmetric_first_coordinate() {
        let model = MvnModel { mean: DVector::zeros(3), covariance: DMatrix::identity(3, 3), ridge: 0.0 };
        let mut rng = RngStream::from_seed(8);
        let draws = sample_mvn(&model, 10_000, &mut rng).unwrap();
        let frac = draws.iter().filter(|d| d[0] > 0.0).count() as f64 / draws.len() as f64;
        assert!((frac - 0.5).abs() <= 0.05);
    }
}
