//! Linear compression by principal component projection.

use crate::error::{check_dim, Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};
use crate::scalar::Scalar;

/// `encode(x) = P·(x − mean)` with orthonormal rows in `P`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEncoder<T> {
    mean: Vec<T>,
    projection: Matrix<T>,
}

impl<T: Scalar> LinearEncoder<T> {
    pub fn from_parts(mean: Vec<T>, projection: Matrix<T>) -> Result<Self> {
        if projection.cols() != mean.len() || projection.rows() == 0 || mean.is_empty() {
            return Err(Error::Input(format!(
                "projection {}x{} does not match mean of length {}",
                projection.rows(),
                projection.cols(),
                mean.len()
            )));
        }
        Ok(Self { mean, projection })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn projection(&self) -> &Matrix<T> {
        &self.projection
    }

    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("linear encoder input", self.input_dim(), x.len())?;
        let centered: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.projection.mul_vec(&centered))
    }

    /// `Pᵀz + mean`
    pub fn decode(&self, z: &[T]) -> Result<Vec<T>> {
        check_dim("linear encoder code", self.output_dim(), z.len())?;
        let mut out = self.projection.tr_mul_vec(z);
        for (o, &m) in out.iter_mut().zip(&self.mean) {
            *o += m;
        }
        Ok(out)
    }

    pub fn reconstruct(&self, x: &[T]) -> Result<Vec<T>> {
        self.decode(&self.encode(x)?)
    }
}

/// Fitted encoder plus the full covariance spectrum (descending).
#[derive(Debug, Clone)]
pub struct LinearFit<T> {
    pub encoder: LinearEncoder<T>,
    pub eigenvalues: Vec<T>,
}

/// Sample mean plus the top-`m` principal directions of the centered data.
///
/// The covariance uses the `1/N` normalisation, so the discarded
/// eigenvalues sum to the mean squared reconstruction residual.
pub fn fit_linear_encoder<T: Scalar>(data: &[Vec<T>], m: usize) -> Result<LinearFit<T>> {
    if data.len() < 2 {
        return Err(Error::Input(
            "linear encoder needs at least 2 points".into(),
        ));
    }
    let dim = data[0].len();
    if m == 0 || m > dim {
        return Err(Error::Input(format!(
            "target dimension {m} must lie in 1..={dim}"
        )));
    }
    let n = T::of(data.len() as f64);
    let mut mean = vec![T::zero(); dim];
    for x in data {
        check_dim("linear encoder input", dim, x.len())?;
        for (m, &v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![T::zero(); dim];
    for x in data {
        for ((c, &v), &m) in centered.iter_mut().zip(x).zip(&mean) {
            *c = v - m;
        }
        cov.rank1_update(T::one() / n, &centered, &centered);
    }
    let (eigenvalues, vectors) = symmetric_eigen(&cov)?;
    let mut projection = Matrix::zeros(m, dim);
    for r in 0..m {
        projection.row_mut(r).copy_from_slice(vectors.row(r));
    }
    Ok(LinearFit {
        encoder: LinearEncoder { mean, projection },
        eigenvalues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                (0..d)
                    .map(|j| rng.sample::<f64, _>(StandardNormal) * (1.0 + j as f64))
                    .collect()
            })
            .collect()
    }

    fn mean_sq_residual(enc: &LinearEncoder<f64>, data: &[Vec<f64>]) -> f64 {
        data.iter()
            .map(|x| {
                let r = enc.reconstruct(x).unwrap();
                r.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            })
            .sum::<f64>()
            / data.len() as f64
    }

    #[test]
    fn rank_one_data_is_reconstructed() {
        let data: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let t = i as f64 * 0.37 - 3.0;
                vec![1.0 + 2.0 * t, -t, 0.5 + 0.25 * t]
            })
            .collect();
        let fit = fit_linear_encoder(&data, 1).unwrap();
        assert!(mean_sq_residual(&fit.encoder, &data) <= 1e-10);
    }

    #[test]
    fn full_rank_projection_is_lossless() {
        let data = gaussian(30, 5, 1);
        let fit = fit_linear_encoder(&data, 5).unwrap();
        assert!(mean_sq_residual(&fit.encoder, &data) <= 1e-10);
    }

    #[test]
    fn residual_equals_discarded_spectrum() {
        let data = gaussian(200, 6, 2);
        let fit = fit_linear_encoder(&data, 2).unwrap();
        // Independent oracle: nalgebra's eigen-decomposition of the same covariance.
        let n = data.len() as f64;
        let flat: Vec<f64> = data.iter().flatten().copied().collect();
        let x = DMatrix::from_row_slice(200, 6, &flat);
        let mean = x.row_mean();
        let centered = DMatrix::from_fn(200, 6, |i, j| x[(i, j)] - mean[j]);
        let cov = centered.transpose() * &centered / n;
        let mut vals: Vec<f64> = SymmetricEigen::new(cov)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let discarded: f64 = vals[2..].iter().sum();
        assert!((mean_sq_residual(&fit.encoder, &data) - discarded).abs() < 1e-8);
    }

    #[test]
    fn rows_orthonormal_and_residual_orthogonal() {
        let data = gaussian(100, 7, 3);
        let fit = fit_linear_encoder(&data, 3).unwrap();
        let p = fit.encoder.projection();
        let gram = p.matmul(&p.transpose());
        assert!(gram.max_abs_diff(&Matrix::identity(3)) < 1e-8);
        for x in data.iter().take(20) {
            let r = fit.encoder.reconstruct(x).unwrap();
            let resid: Vec<f64> = x.iter().zip(&r).map(|(a, b)| a - b).collect();
            for row in 0..3 {
                assert!(dot(&resid, p.row(row)).abs() <= 1e-8);
            }
        }
        assert!(fit.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn mean_encodes_to_zero_and_errors() {
        let data = gaussian(10, 4, 4);
        let fit = fit_linear_encoder(&data, 2).unwrap();
        let z = fit.encoder.encode(fit.encoder.mean()).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-15));
        assert!(matches!(fit_linear_encoder(&data, 5), Err(Error::Input(_))));
        assert!(fit_linear_encoder(&data[..1], 1).is_err());
        assert!(fit.encoder.encode(&[1.0]).is_err());
    }
}
