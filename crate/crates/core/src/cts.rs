//! Linear contextual Thompson Sampling.
//!
//! Each arm keeps a Gaussian posterior `N(μ̂, v²·B⁻¹)` with
//! `B = I + Σ x xᵀ`, `f = Σ r x` and `μ̂ = B⁻¹ f`. The inverse is maintained
//! with the Sherman–Morrison identity and refreshed by a full inversion every
//! `refresh_every` updates.
//!
//! The exploration scale is `v = R·sqrt((24/ε)·d·ln(1/γ))`. Defaults for
//! `R`, `ε` and `γ` (0.5, 0.5, 0.1) are a choice of this crate; tune them
//! through [`CtsConfig`].

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{cholesky, dot, spd_inverse, Matrix};
use crate::scalar::Scalar;
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CtsConfig<T> {
    /// Number of arms `K`.
    pub arms: usize,
    /// Context dimension `d`.
    pub dim: usize,
    pub r: T,
    pub epsilon: T,
    pub gamma: T,
    pub seed: u64,
    /// Replaces the computed exploration scale when set. `Some(0)` gives the
    /// greedy policy.
    pub scale_override: Option<T>,
    pub refresh_every: usize,
}

impl<T: Scalar> CtsConfig<T> {
    pub fn new(arms: usize, dim: usize) -> Self {
        Self {
            arms,
            dim,
            r: T::of(0.5),
            epsilon: T::of(0.5),
            gamma: T::of(0.1),
            seed: 0,
            scale_override: None,
            refresh_every: 1000,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn greedy(mut self) -> Self {
        self.scale_override = Some(T::zero());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.arms == 0 {
            return Err(Error::config("bandit.arms", "must be at least 1"));
        }
        if self.dim == 0 {
            return Err(Error::config("bandit.dim", "must be at least 1"));
        }
        if !(self.r > T::zero()) || !self.r.is_finite() {
            return Err(Error::config("bandit.r", "must be positive and finite"));
        }
        if !(self.epsilon > T::zero() && self.epsilon <= T::one()) {
            return Err(Error::config("bandit.epsilon", "must lie in (0, 1]"));
        }
        if !(self.gamma > T::zero() && self.gamma <= T::one()) {
            return Err(Error::config("bandit.gamma", "must lie in (0, 1]"));
        }
        if let Some(v) = self.scale_override {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(Error::config(
                    "bandit.scale_override",
                    "must be finite and >= 0",
                ));
            }
        }
        if self.refresh_every == 0 {
            return Err(Error::config("bandit.refresh_every", "must be at least 1"));
        }
        Ok(())
    }
}

/// `v = R·sqrt((24/ε)·d·ln(1/γ))`, or the override when one is configured.
pub fn exploration_scale<T: Scalar>(cfg: &CtsConfig<T>) -> T {
    if let Some(v) = cfg.scale_override {
        return v;
    }
    let d = T::of(cfg.dim as f64);
    cfg.r * (T::of(24.0) / cfg.epsilon * d * (T::one() / cfg.gamma).ln()).sqrt()
}

/// Sufficient statistics of one arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmPosterior<T> {
    pub(crate) b: Matrix<T>,
    pub(crate) b_inv: Matrix<T>,
    pub(crate) f: Vec<T>,
    pub(crate) mu_hat: Vec<T>,
    pub(crate) updates: u64,
}

impl<T: Scalar> ArmPosterior<T> {
    pub fn fresh(dim: usize) -> Self {
        Self {
            b: Matrix::identity(dim),
            b_inv: Matrix::identity(dim),
            f: vec![T::zero(); dim],
            mu_hat: vec![T::zero(); dim],
            updates: 0,
        }
    }

    pub fn design(&self) -> &Matrix<T> {
        &self.b
    }

    pub fn design_inverse(&self) -> &Matrix<T> {
        &self.b_inv
    }

    pub fn reward_sum(&self) -> &[T] {
        &self.f
    }

    pub fn mean(&self) -> &[T] {
        &self.mu_hat
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    fn absorb(&mut self, x: &[T], r: T, refresh_every: usize) -> Result<()> {
        self.b.rank1_update(T::one(), x, x);
        for (fi, &xi) in self.f.iter_mut().zip(x) {
            *fi += r * xi;
        }
        let bx = self.b_inv.mul_vec(x);
        let denom = T::one() + dot(x, &bx);
        self.b_inv.rank1_update(-T::one() / denom, &bx, &bx);
        self.updates += 1;
        if self.updates % refresh_every as u64 == 0 {
            self.b_inv = spd_inverse(&self.b)?;
        }
        self.mu_hat = self.b_inv.mul_vec(&self.f);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CtsBandit<T> {
    config: CtsConfig<T>,
    scale: T,
    arms: Vec<ArmPosterior<T>>,
    rng: ChaCha8Rng,
}

impl<T: Scalar> CtsBandit<T> {
    pub fn new(config: CtsConfig<T>) -> Result<Self> {
        config.validate()?;
        let scale = exploration_scale(&config);
        if !scale.is_finite() {
            return Err(Error::config("bandit", "exploration scale is not finite"));
        }
        Ok(Self {
            arms: (0..config.arms)
                .map(|_| ArmPosterior::fresh(config.dim))
                .collect(),
            rng: rng_from(config.seed),
            scale,
            config,
        })
    }

    pub(crate) fn from_parts(
        config: CtsConfig<T>,
        arms: Vec<ArmPosterior<T>>,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut bandit = Self::new(config)?;
        if arms.len() != config.arms {
            return Err(Error::Format(format!(
                "snapshot has {} arms, expected {}",
                arms.len(),
                config.arms
            )));
        }
        bandit.arms = arms;
        bandit.rng = rng;
        Ok(bandit)
    }

    pub fn config(&self) -> &CtsConfig<T> {
        &self.config
    }

    pub fn arm_count(&self) -> usize {
        self.arms.len()
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }

    pub fn scale(&self) -> T {
        self.scale
    }

    pub fn arms(&self) -> &[ArmPosterior<T>] {
        &self.arms
    }

    pub fn arm(&self, arm: usize) -> Result<&ArmPosterior<T>> {
        self.arms.get(arm).ok_or_else(|| {
            Error::Input(format!("arm {arm} out of range (K = {})", self.arms.len()))
        })
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    fn check_context(&self, x: &[T]) -> Result<()> {
        check_dim("context", self.config.dim, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("context has non-finite entries".into()));
        }
        Ok(())
    }

    /// Per-arm scores `xᵀμ̃` from one posterior draw each.
    pub fn sample_scores(&mut self, x: &[T]) -> Result<Vec<T>> {
        self.check_context(x)?;
        let v = self.scale;
        let d = self.config.dim;
        let mut scores = Vec::with_capacity(self.arms.len());
        for (i, arm) in self.arms.iter().enumerate() {
            let mean = dot(x, &arm.mu_hat);
            if v == T::zero() {
                scores.push(mean);
                continue;
            }
            let mut cov = Matrix::zeros(d, d);
            for r in 0..d {
                for c in 0..=r {
                    let s = (arm.b_inv[(r, c)] + arm.b_inv[(c, r)]) * T::of(0.5) * v * v;
                    cov[(r, c)] = s;
                    cov[(c, r)] = s;
                }
            }
            let l =
                cholesky(&cov).map_err(|e| Error::Numerical(format!("arm {i} covariance: {e}")))?;
            // xᵀ(μ̂ + Lξ) = xᵀμ̂ + (Lᵀx)ᵀξ
            let ltx = l.tr_mul_vec(x);
            let mut score = mean;
            for &w in &ltx {
                let xi: f64 = self.rng.sample(StandardNormal);
                score += w * T::of(xi);
            }
            scores.push(score);
        }
        Ok(scores)
    }

    /// Draws one posterior sample per arm and returns the arm with the
    /// highest sampled reward. Ties go to the lowest index.
    pub fn sample_arm(&mut self, x: &[T]) -> Result<usize> {
        let scores = self.sample_scores(x)?;
        Ok(argmax(&scores))
    }

    pub fn update(&mut self, arm: usize, x: &[T], reward: T) -> Result<()> {
        self.check_context(x)?;
        if !reward.is_finite() {
            return Err(Error::Input("reward is not finite".into()));
        }
        let refresh = self.config.refresh_every;
        let k = self.arms.len();
        let posterior = self
            .arms
            .get_mut(arm)
            .ok_or_else(|| Error::Input(format!("arm {arm} out of range (K = {k})")))?;
        posterior.absorb(x, reward, refresh)
    }

    pub fn posterior_mean(&self, arm: usize) -> Result<&[T]> {
        Ok(self.arm(arm)?.mean())
    }

    /// Resets every arm to its fresh state. The generator keeps its position.
    pub fn reinitialize(&mut self) {
        let d = self.config.dim;
        self.arms
            .iter_mut()
            .for_each(|a| *a = ArmPosterior::fresh(d));
    }
}

/// Index of the largest value; the first one wins ties. NaN never wins.
pub fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() {
            best = i;
        }
    }
    best
}
