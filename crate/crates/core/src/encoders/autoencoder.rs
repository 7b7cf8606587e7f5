//! One-hidden-layer sigmoid autoencoder trained by minibatch SGD on
//! mean-squared reconstruction error.
//!
//! Inputs are min-max scaled to `[0, 1]` with a single global offset and
//! range fitted on the initial training set; the decoder output is sigmoid,
//! so the loss lives in that scaled space. Fine-tuning keeps the scaling
//! fixed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, Matrix};
use crate::scalar::Scalar;
use crate::seed::rng_from;

use super::TrainConfig;

#[inline]
fn sigmoid<T: Scalar>(v: T) -> T {
    T::one() / (T::one() + (-v).exp())
}

/// Weights and biases of the network; also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderParams<T> {
    /// Encoder weights, `n × D`.
    pub w1: Matrix<T>,
    pub b1: Vec<T>,
    /// Decoder weights, `D × n`.
    pub w2: Matrix<T>,
    pub b2: Vec<T>,
}

impl<T: Scalar> AutoencoderParams<T> {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w1: Matrix::zeros(hidden, input_dim),
            b1: vec![T::zero(); hidden],
            w2: Matrix::zeros(input_dim, hidden),
            b2: vec![T::zero(); input_dim],
        }
    }

    fn tensors(&self) -> [&[T]; 4] {
        [self.w1.as_slice(), &self.b1, self.w2.as_slice(), &self.b2]
    }

    fn tensors_mut(&mut self) -> [&mut [T]; 4] {
        [
            self.w1.as_mut_slice(),
            &mut self.b1,
            self.w2.as_mut_slice(),
            &mut self.b2,
        ]
    }

    /// All parameters flattened in the order `w1, b1, w2, b2`.
    pub fn flat(&self) -> Vec<T> {
        self.tensors()
            .iter()
            .flat_map(|t| t.iter().copied())
            .collect()
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.tensors_mut().into_iter().flat_map(|t| t.iter_mut())
    }

    fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// `self -= lr · grad`
    fn descend(&mut self, lr: T, grad: &Self) {
        for (p, g) in self.tensors_mut().into_iter().zip(grad.tensors()) {
            axpy(-lr, g, p);
        }
    }
}

/// Global affine map of raw inputs onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMax<T> {
    pub offset: T,
    pub range: T,
}

impl<T: Scalar> MinMax<T> {
    pub fn identity() -> Self {
        Self {
            offset: T::zero(),
            range: T::one(),
        }
    }

    pub fn fit(data: &[Vec<T>]) -> Self {
        let (lo, hi) = data
            .iter()
            .flatten()
            .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        let range = hi - lo;
        if !lo.is_finite() || !(range > T::zero()) {
            return Self {
                offset: if lo.is_finite() { lo } else { T::zero() },
                range: T::one(),
            };
        }
        Self { offset: lo, range }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|&v| (v - self.offset) / self.range).collect()
    }

    pub fn invert(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|&v| v * self.range + self.offset).collect()
    }
}

/// Per-run training diagnostics. MSE values are in scaled space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport<T> {
    pub initial_mse: T,
    pub epoch_mse: Vec<T>,
}

impl<T: Scalar> TrainReport<T> {
    pub fn final_mse(&self) -> T {
        *self.epoch_mse.last().unwrap_or(&self.initial_mse)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder<T> {
    params: AutoencoderParams<T>,
    scaling: MinMax<T>,
}

impl<T: Scalar> Autoencoder<T> {
    /// Fresh model with weights uniform in `±1/sqrt(D)` and zero biases.
    pub fn init(input_dim: usize, hidden: usize, scaling: MinMax<T>, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::Input(
                "autoencoder dimensions must be at least 1".into(),
            ));
        }
        let bound = 1.0 / (input_dim as f64).sqrt();
        let mut rng = rng_from(seed);
        let mut params = AutoencoderParams::zeros(input_dim, hidden);
        for w in params
            .w1
            .as_mut_slice()
            .iter_mut()
            .chain(params.w2.as_mut_slice().iter_mut())
        {
            *w = T::of(rng.random_range(-bound..=bound));
        }
        Ok(Self { params, scaling })
    }

    pub fn from_params(params: AutoencoderParams<T>, scaling: MinMax<T>) -> Result<Self> {
        let n = params.w1.rows();
        let d = params.w1.cols();
        if n == 0 || d == 0 {
            return Err(Error::Input(
                "autoencoder dimensions must be at least 1".into(),
            ));
        }
        if params.b1.len() != n
            || params.w2.rows() != d
            || params.w2.cols() != n
            || params.b2.len() != d
        {
            return Err(Error::Input(
                "inconsistent autoencoder parameter shapes".into(),
            ));
        }
        if !params.is_finite() {
            return Err(Error::Input("autoencoder parameters must be finite".into()));
        }
        Ok(Self { params, scaling })
    }

    pub fn input_dim(&self) -> usize {
        self.params.w1.cols()
    }

    pub fn hidden(&self) -> usize {
        self.params.w1.rows()
    }

    pub fn params(&self) -> &AutoencoderParams<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut AutoencoderParams<T> {
        &mut self.params
    }

    pub fn scaling(&self) -> MinMax<T> {
        self.scaling
    }

    fn hidden_of_scaled(&self, xs: &[T]) -> Vec<T> {
        let mut h = self.params.w1.mul_vec(xs);
        for (hi, &bi) in h.iter_mut().zip(&self.params.b1) {
            *hi = sigmoid(*hi + bi);
        }
        h
    }

    fn output_of_hidden(&self, h: &[T]) -> Vec<T> {
        let mut y = self.params.w2.mul_vec(h);
        for (yi, &bi) in y.iter_mut().zip(&self.params.b2) {
            *yi = sigmoid(*yi + bi);
        }
        y
    }

    /// `sigmoid(W1·x̃ + b1)` where `x̃` is the scaled input.
    pub fn encode(&self, x: &[T]) -> Result<Vec<T>> {
        check_dim("autoencoder input", self.input_dim(), x.len())?;
        Ok(self.hidden_of_scaled(&self.scaling.apply(x)))
    }

    /// Decodes a hidden code back to the raw input space.
    pub fn decode(&self, z: &[T]) -> Result<Vec<T>> {
        check_dim("autoencoder code", self.hidden(), z.len())?;
        Ok(self.scaling.invert(&self.output_of_hidden(z)))
    }

    pub fn reconstruct(&self, x: &[T]) -> Result<Vec<T>> {
        self.decode(&self.encode(x)?)
    }

    /// Mean over samples of the per-sample mean squared error, in scaled space.
    pub fn mse(&self, data: &[Vec<T>]) -> Result<T> {
        if data.is_empty() {
            return Err(Error::Input("mse of empty data".into()));
        }
        let d = T::of(self.input_dim() as f64);
        let mut total = T::zero();
        for x in data {
            check_dim("autoencoder input", self.input_dim(), x.len())?;
            let xs = self.scaling.apply(x);
            let y = self.output_of_hidden(&self.hidden_of_scaled(&xs));
            total += y
                .iter()
                .zip(&xs)
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>()
                / d;
        }
        Ok(total / T::of(data.len() as f64))
    }

    /// Loss and its analytic gradient averaged over `batch` (raw inputs).
    pub fn loss_and_gradient(&self, batch: &[Vec<T>]) -> Result<(T, AutoencoderParams<T>)> {
        if batch.is_empty() {
            return Err(Error::Input("gradient of empty batch".into()));
        }
        let dim = self.input_dim();
        let hidden = self.hidden();
        let d = T::of(dim as f64);
        let two = T::of(2.0);
        let mut grad = AutoencoderParams::zeros(dim, hidden);
        let mut loss = T::zero();
        for x in batch {
            check_dim("autoencoder input", dim, x.len())?;
            let xs = self.scaling.apply(x);
            let h = self.hidden_of_scaled(&xs);
            let y = self.output_of_hidden(&h);
            let mut delta2 = vec![T::zero(); dim];
            for i in 0..dim {
                let e = y[i] - xs[i];
                loss += e * e / d;
                delta2[i] = two * e / d * y[i] * (T::one() - y[i]);
            }
            grad.w2.rank1_update(T::one(), &delta2, &h);
            axpy(T::one(), &delta2, &mut grad.b2);
            let mut delta1 = self.params.w2.tr_mul_vec(&delta2);
            for (d1, &hj) in delta1.iter_mut().zip(&h) {
                *d1 *= hj * (T::one() - hj);
            }
            grad.w1.rank1_update(T::one(), &delta1, &xs);
            axpy(T::one(), &delta1, &mut grad.b1);
        }
        let inv = T::one() / T::of(batch.len() as f64);
        for t in grad.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= inv);
        }
        Ok((loss * inv, grad))
    }

    fn sgd(&mut self, data: &[Vec<T>], cfg: &TrainConfig) -> Result<TrainReport<T>> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::Input(
                "cannot train an autoencoder on empty data".into(),
            ));
        }
        let initial_mse = self.mse(data)?;
        let lr = T::of(cfg.learning_rate);
        let mut rng = rng_from(cfg.seed);
        let mut order: Vec<usize> = (0..data.len()).collect();
        let mut epoch_mse = Vec::with_capacity(cfg.epochs);
        let mut batch = Vec::with_capacity(cfg.minibatch_size);
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.minibatch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| data[i].clone()));
                let (_, grad) = self.loss_and_gradient(&batch)?;
                self.params.descend(lr, &grad);
            }
            let mse = self.mse(data)?;
            if !mse.is_finite() || !self.params.is_finite() {
                return Err(Error::Training(format!(
                    "reconstruction error became {mse} at epoch {epoch} (learning rate {}, initial mse {initial_mse})",
                    cfg.learning_rate
                )));
            }
            epoch_mse.push(mse);
        }
        Ok(TrainReport {
            initial_mse,
            epoch_mse,
        })
    }
}

/// Trains a fresh `n`-hidden-unit autoencoder on `data`.
pub fn train_autoencoder<T: Scalar>(
    data: &[Vec<T>],
    hidden: usize,
    cfg: &TrainConfig,
) -> Result<(Autoencoder<T>, TrainReport<T>)> {
    let first = data
        .first()
        .ok_or_else(|| Error::Input("cannot train an autoencoder on empty data".into()))?;
    let mut model = Autoencoder::init(first.len(), hidden, MinMax::fit(data), cfg.seed)?;
    let report = model.sgd(data, cfg)?;
    Ok((model, report))
}

/// Continues SGD from the current parameters for `cfg.epochs` passes over `batch`.
pub fn update_autoencoder<T: Scalar>(
    model: &mut Autoencoder<T>,
    batch: &[Vec<T>],
    cfg: &TrainConfig,
) -> Result<TrainReport<T>> {
    model.sgd(batch, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_data(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect()
    }

    /// Central finite differences over every parameter.
    fn fd_gradient(model: &Autoencoder<f64>, batch: &[Vec<f64>], h: f64) -> Vec<f64> {
        let count = model.params().flat().len();
        let mut out = Vec::with_capacity(count);
        for idx in 0..count {
            let mut plus = model.clone();
            *plus.params_mut().flat_mut().nth(idx).unwrap() += h;
            let mut minus = model.clone();
            *minus.params_mut().flat_mut().nth(idx).unwrap() -= h;
            out.push((plus.mse(batch).unwrap() - minus.mse(batch).unwrap()) / (2.0 * h));
        }
        out
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let data = random_data(10, 5, 3);
        let mut model = Autoencoder::init(5, 3, MinMax::fit(&data), 17).unwrap();
        // Non-zero biases so every tensor is exercised.
        for (i, b) in model.params_mut().b1.iter_mut().enumerate() {
            *b = 0.1 * i as f64 - 0.1;
        }
        for (i, b) in model.params_mut().b2.iter_mut().enumerate() {
            *b = 0.05 * i as f64 - 0.1;
        }
        let (loss, grad) = model.loss_and_gradient(&data).unwrap();
        assert!((loss - model.mse(&data).unwrap()).abs() < 1e-14);
        let fd = fd_gradient(&model, &data, 1e-5);
        for (a, n) in grad.flat().iter().zip(&fd) {
            let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-8);
            assert!(rel < 1e-4, "analytic {a} vs numeric {n}");
        }
    }

    #[test]
    fn learns_a_constant_vector() {
        let v = vec![0.3, -1.0, 2.0, 0.7];
        let data = vec![v.clone(); 200];
        let cfg = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let (model, report) = train_autoencoder(&data, 1, &cfg).unwrap();
        assert!(report.final_mse() <= report.initial_mse);
        let rec = model.reconstruct(&v).unwrap();
        let err: f64 = rec
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / 4.0;
        let norm: f64 = v.iter().map(|a| a * a).sum();
        assert!(err < 1e-3 * norm, "err {err}");
    }

    #[test]
    fn descends_over_first_epoch_with_identity_like_init() {
        let data = random_data(256, 6, 4);
        let mut params = AutoencoderParams::zeros(6, 6);
        for i in 0..6 {
            params.w1[(i, i)] = 4.0;
            params.w2[(i, i)] = 4.0;
            params.b1[i] = -2.0;
            params.b2[i] = -2.0;
        }
        let mut model = Autoencoder::from_params(params, MinMax::identity()).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            learning_rate: 0.5,
            minibatch_size: 16,
            seed: 1,
        };
        let report = update_autoencoder(&mut model, &data, &cfg).unwrap();
        assert!(report.final_mse() < report.initial_mse);
    }

    #[test]
    fn zero_gradient_fixed_point_is_stationary() {
        let mut params = AutoencoderParams::zeros(3, 2);
        params.w2 = Matrix::from_rows(&[vec![0.2, -0.4], vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        params.b2 = vec![0.1, -0.3, 0.0];
        let model = Autoencoder::from_params(params, MinMax::identity()).unwrap();
        // With W1 = 0 the output is constant, so feeding it back gives zero error.
        let fixed = model.reconstruct(&[0.0, 0.0, 0.0]).unwrap();
        let (_, grad) = model.loss_and_gradient(&[fixed.clone()]).unwrap();
        assert!(grad.flat().iter().all(|&g| g == 0.0));
        let mut updated = model.clone();
        update_autoencoder(&mut updated, &vec![fixed; 8], &TrainConfig::default()).unwrap();
        assert_eq!(updated, model);
    }

    #[test]
    fn fine_tuning_improves_new_distribution() {
        let old = random_data(300, 8, 5);
        let (mut model, _) = train_autoencoder(&old, 2, &TrainConfig::default()).unwrap();
        let shifted: Vec<Vec<f64>> = old
            .iter()
            .map(|x| x.iter().map(|v| 1.0 - v * v).collect())
            .collect();
        let before = model.mse(&shifted).unwrap();
        update_autoencoder(&mut model, &shifted, &TrainConfig::default()).unwrap();
        assert!(model.mse(&shifted).unwrap() < before);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let empty: Vec<Vec<f64>> = Vec::new();
        assert!(matches!(
            train_autoencoder(&empty, 2, &TrainConfig::default()),
            Err(Error::Input(_))
        ));
        let data = random_data(10, 3, 1);
        let (mut model, _) = train_autoencoder(&data, 2, &TrainConfig::default()).unwrap();
        assert!(matches!(
            update_autoencoder(&mut model, &empty, &TrainConfig::default()),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn divergence_is_reported() {
        // Saturating sigmoids keep the loss bounded for any finite step size,
        // so corrupt a weight directly to exercise the detector.
        let data = random_data(20, 3, 2);
        let (mut model, _) = train_autoencoder(&data, 2, &TrainConfig::default()).unwrap();
        model.params_mut().w2[(0, 0)] = f64::INFINITY;
        model.params_mut().w2[(0, 1)] = f64::NEG_INFINITY;
        assert!(matches!(
            update_autoencoder(&mut model, &data, &TrainConfig::default()),
            Err(Error::Training(_))
        ));
    }

    #[test]
    fn zero_weights_encode_to_one_half() {
        let model =
            Autoencoder::from_params(AutoencoderParams::<f64>::zeros(4, 3), MinMax::identity())
                .unwrap();
        assert_eq!(model.encode(&[0.3, 9.0, -2.0, 1.0]).unwrap(), vec![0.5; 3]);
        assert!(model.encode(&[1.0]).is_err());
    }

    #[test]
    fn reconstruction_consistent_with_reported_loss() {
        let data = random_data(100, 6, 8);
        let (model, report) = train_autoencoder(&data, 3, &TrainConfig::default()).unwrap();
        let scaling = model.scaling();
        let mse: f64 = data
            .iter()
            .map(|x| {
                let r = scaling.apply(&model.reconstruct(x).unwrap());
                let xs = scaling.apply(x);
                r.iter()
                    .zip(&xs)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    / 6.0
            })
            .sum::<f64>()
            / 100.0;
        assert!(mse <= report.final_mse() + 1e-9);
    }

    #[test]
    fn training_is_seed_deterministic() {
        let data = random_data(50, 4, 9);
        let a = train_autoencoder(&data, 2, &TrainConfig::default()).unwrap();
        let b = train_autoencoder(&data, 2, &TrainConfig::default()).unwrap();
        assert_eq!(a.0, b.0);
    }
}
