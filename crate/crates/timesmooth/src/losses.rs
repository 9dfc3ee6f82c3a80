//! Time-indexed loss families and the quantile-loss primitive.
//!
//! A [`LossOracle`] is a family `f_1, ..., f_T` of losses over `R^d` with
//! exact and stochastic gradients. Indices `t <= 0` evaluate to zero (loss
//! and gradient alike); that padding convention is what every windowed
//! quantity in this crate relies on during warm-up.
//!
//! Two concrete families are provided: shifting quadratics `||x - c_t||^2`
//! (the canonical concept-drift toy) and bounded sinusoids
//! `sum_j M sin(x_j + phi_t)`, which satisfy the boundedness/smoothness
//! assumptions the bound verifiers need with analytically exact constants.
//! [`with_gaussian_noise`] wraps any family with unbiased Gaussian gradient
//! noise of a prescribed total variance.

use rand::RngCore;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::seeding;

/// Analytic constants of a loss family: `|f_t| <= M`, Lipschitz constant
/// `L`, smoothness constant `beta`, and gradient-noise standard deviation
/// `sigma` (total, i.e. `E||g_hat - g||^2 <= sigma^2`).
///
/// `None` marks a constant that does not exist over the family's domain
/// (e.g. quadratics are unbounded on all of `R^d`); verifiers refuse to run
/// against uncertified metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessMeta {
    /// Bound on `|f_t(x)|` (M), if one exists.
    pub loss_bound: Option<f64>,
    /// Lipschitz constant of `f_t` (L), if one exists.
    pub lipschitz: Option<f64>,
    /// Gradient-Lipschitz (smoothness) constant (beta), if one exists.
    pub smoothness: Option<f64>,
    /// Gradient-noise standard deviation (sigma); zero for exact oracles.
    pub noise_std: f64,
}

impl SmoothnessMeta {
    /// True when every constant is certified (present and finite).
    pub fn certified(&self) -> bool {
        [self.loss_bound, self.lipschitz, self.smoothness]
            .iter()
            .all(|c| matches!(c, Some(v) if v.is_finite() && *v >= 0.0))
            && self.noise_std >= 0.0
    }
}

/// A time-indexed family of losses with exact and stochastic gradients.
///
/// `eval` and `grad` return exactly zero for `t <= 0`. `noisy_grad` must be
/// unbiased with total variance at most `meta().noise_std^2`; the caller owns
/// the RNG stream, so determinism is a property of (seed, call order).
pub trait LossOracle: Send + Sync {
    /// Number of time steps `T` the family is defined for.
    fn horizon(&self) -> usize;

    /// Dimension `d` of the parameter space.
    fn dim(&self) -> usize;

    /// `f_t(x)`; zero for `t <= 0`.
    fn eval(&self, t: i64, x: &[f64]) -> f64;

    /// Exact gradient of `f_t` at `x`; zero for `t <= 0`.
    fn grad(&self, t: i64, x: &[f64]) -> Vec<f64>;

    /// Stochastic gradient estimate. Defaults to the exact gradient.
    fn noisy_grad(&self, t: i64, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let _ = rng;
        self.grad(t, x)
    }

    /// Analytic constants of the family.
    fn meta(&self) -> SmoothnessMeta;

    /// Whether index `t` can currently be evaluated. Windowed optimizers
    /// check this before reaching into the past.
    fn available(&self, t: i64) -> bool {
        t >= 1 && t <= self.horizon() as i64
    }
}

fn check_index(t: i64, horizon: usize) {
    assert!(
        t <= horizon as i64,
        "loss index {t} beyond family horizon {horizon}"
    );
}

/// Shifting quadratics `f_t(x) = ||x - c_t||^2` with exact gradients
/// `2 (x - c_t)`.
///
/// Unbounded on `R^d`, so `loss_bound` and `lipschitz` are only certified
/// once a domain box is attached via [`QuadraticFamily::with_domain_box`].
#[derive(Debug, Clone)]
pub struct QuadraticFamily {
    centers: Vec<Vec<f64>>,
    domain_box: Option<(Vec<f64>, Vec<f64>)>,
}

impl QuadraticFamily {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::Config("quadratic family needs at least one center".into()));
        }
        let dim = centers[0].len();
        if dim == 0 {
            return Err(Error::Config("quadratic centers must be non-empty vectors".into()));
        }
        for (i, c) in centers.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::Config(format!(
                    "center {} has dimension {}, expected {}",
                    i + 1,
                    c.len(),
                    dim
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("center {} is not finite", i + 1)));
            }
        }
        Ok(Self { centers, domain_box: None })
    }

    /// One-dimensional family from scalar centers.
    pub fn scalar(centers: &[f64]) -> Result<Self> {
        Self::new(centers.iter().map(|&c| vec![c]).collect())
    }

    /// Certify constants over the box `[lo, hi]` (componentwise). Needed
    /// because the family violates boundedness on all of `R^d`.
    pub fn with_domain_box(mut self, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        let dim = self.centers[0].len();
        if lo.len() != dim || hi.len() != dim {
            return Err(Error::Config("domain box dimension mismatch".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l < h)) {
            return Err(Error::Config("domain box must satisfy lo < hi".into()));
        }
        self.domain_box = Some((lo, hi));
        Ok(self)
    }

    fn center(&self, t: i64) -> &[f64] {
        &self.centers[(t - 1) as usize]
    }
}

impl LossOracle for QuadraticFamily {
    fn horizon(&self) -> usize {
        self.centers.len()
    }

    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn eval(&self, t: i64, x: &[f64]) -> f64 {
        check_index(t, self.horizon());
        if t <= 0 {
            return 0.0;
        }
        self.center(t)
            .iter()
            .zip(x)
            .map(|(c, xi)| (xi - c) * (xi - c))
            .sum()
    }

    fn grad(&self, t: i64, x: &[f64]) -> Vec<f64> {
        check_index(t, self.horizon());
        if t <= 0 {
            return vec![0.0; x.len()];
        }
        self.center(t).iter().zip(x).map(|(c, xi)| 2.0 * (xi - c)).collect()
    }

    fn meta(&self) -> SmoothnessMeta {
        // The Hessian is 2I everywhere, so smoothness holds globally; the
        // loss and Lipschitz bounds exist only over a declared box.
        let (loss_bound, lipschitz) = match &self.domain_box {
            None => (None, None),
            Some((lo, hi)) => {
                let m = self
                    .centers
                    .iter()
                    .map(|c| {
                        c.iter()
                            .zip(lo.iter().zip(hi))
                            .map(|(cj, (l, h))| {
                                let r = (l - cj).abs().max((h - cj).abs());
                                r * r
                            })
                            .sum::<f64>()
                    })
                    .fold(0.0_f64, f64::max);
                (Some(m), Some(2.0 * m.sqrt()))
            }
        };
        SmoothnessMeta {
            loss_bound,
            lipschitz,
            smoothness: Some(2.0),
            noise_std: 0.0,
        }
    }
}

/// Bounded sinusoid family `f_t(x) = sum_j M sin(x_j + phi_t)`.
///
/// Satisfies all the assumptions the convergence bounds need, with exact
/// constants: `|f_t| <= M d`, `L = M sqrt(d)`, `beta = M`.
#[derive(Debug, Clone)]
pub struct SinusoidFamily {
    amplitude: f64,
    phases: Vec<f64>,
    dim: usize,
}

impl SinusoidFamily {
    pub fn new(amplitude: f64, phases: Vec<f64>, dim: usize) -> Result<Self> {
        if !(amplitude > 0.0) || !amplitude.is_finite() {
            return Err(Error::Config(format!(
                "sinusoid amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if phases.is_empty() {
            return Err(Error::Config("sinusoid family needs at least one phase".into()));
        }
        if dim == 0 {
            return Err(Error::Config("sinusoid dimension must be at least 1".into()));
        }
        Ok(Self { amplitude, phases, dim })
    }

    /// Family with phases drawn uniformly from `[0, 2*pi)` — a drifting
    /// landscape whose minima move adversarially from step to step.
    pub fn random_phases(amplitude: f64, horizon: usize, dim: usize, seed: u64) -> Result<Self> {
        use rand::Rng;
        let mut rng = seeding::rng_for(seed, 0x5150);
        let phases = (0..horizon)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        Self::new(amplitude, phases, dim)
    }

    fn phase(&self, t: i64) -> f64 {
        self.phases[(t - 1) as usize]
    }
}

impl LossOracle for SinusoidFamily {
    fn horizon(&self) -> usize {
        self.phases.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: i64, x: &[f64]) -> f64 {
        check_index(t, self.horizon());
        if t <= 0 {
            return 0.0;
        }
        debug_assert_eq!(x.len(), self.dim);
        let phi = self.phase(t);
        x.iter().map(|xi| self.amplitude * (xi + phi).sin()).sum()
    }

    fn grad(&self, t: i64, x: &[f64]) -> Vec<f64> {
        check_index(t, self.horizon());
        if t <= 0 {
            return vec![0.0; x.len()];
        }
        debug_assert_eq!(x.len(), self.dim);
        let phi = self.phase(t);
        x.iter().map(|xi| self.amplitude * (xi + phi).cos()).collect()
    }

    fn meta(&self) -> SmoothnessMeta {
        let d = self.dim as f64;
        SmoothnessMeta {
            loss_bound: Some(self.amplitude * d),
            lipschitz: Some(self.amplitude * d.sqrt()),
            smoothness: Some(self.amplitude),
            noise_std: 0.0,
        }
    }
}

/// Wraps an oracle with i.i.d. zero-mean Gaussian gradient noise of total
/// variance `sigma^2` (isotropic: per-coordinate variance `sigma^2 / d`).
///
/// The noise RNG is owned by the caller; [`GaussianNoise::stream`] derives
/// reproducible, uncorrelated streams from the wrapper's seed so concurrent
/// experiments can share the oracle read-only.
#[derive(Debug, Clone)]
pub struct GaussianNoise<O> {
    inner: O,
    sigma: f64,
    seed: u64,
}

impl<O: LossOracle> GaussianNoise<O> {
    pub fn new(inner: O, sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::Config(format!(
                "noise standard deviation must be nonnegative, got {sigma}"
            )));
        }
        Ok(Self { inner, sigma, seed })
    }

    /// RNG stream `id` for this oracle's seed.
    pub fn stream(&self, id: u64) -> ChaCha8Rng {
        seeding::rng_for(self.seed, id)
    }

    /// The default stream (id 0).
    pub fn default_stream(&self) -> ChaCha8Rng {
        self.stream(0)
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }
}

impl<O: LossOracle> LossOracle for GaussianNoise<O> {
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, t: i64, x: &[f64]) -> f64 {
        self.inner.eval(t, x)
    }

    fn grad(&self, t: i64, x: &[f64]) -> Vec<f64> {
        self.inner.grad(t, x)
    }

    fn noisy_grad(&self, t: i64, x: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
        let mut g = self.inner.grad(t, x);
        if self.sigma > 0.0 {
            // Total variance sigma^2 split evenly across coordinates.
            let per_coord = self.sigma / (x.len() as f64).sqrt();
            for gi in &mut g {
                let z: f64 = StandardNormal.sample(rng);
                *gi += per_coord * z;
            }
        }
        g
    }

    fn meta(&self) -> SmoothnessMeta {
        SmoothnessMeta { noise_std: self.sigma, ..self.inner.meta() }
    }

    fn available(&self, t: i64) -> bool {
        self.inner.available(t)
    }
}

/// Convenience constructor mirroring the wrapper.
pub fn with_gaussian_noise<O: LossOracle>(oracle: O, sigma: f64, seed: u64) -> Result<GaussianNoise<O>> {
    GaussianNoise::new(oracle, sigma, seed)
}

fn check_quantile(q: f64) -> Result<()> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("quantile must lie in (0, 1), got {q}")));
    }
    Ok(())
}

/// Pinball loss `q max(y - yhat, 0) + (1 - q) max(yhat - y, 0)`.
pub fn quantile_loss(y: f64, yhat: f64, q: f64) -> Result<f64> {
    check_quantile(q)?;
    Ok(pinball(y, yhat, q))
}

/// Subgradient of the pinball loss with respect to the forecast `yhat`:
/// `-q` under-forecast, `1 - q` over-forecast, `0` at the kink (any value in
/// `[-q, 1-q]` would be valid there; zero avoids drift at exact fits).
pub fn quantile_loss_subgradient(y: f64, yhat: f64, q: f64) -> Result<f64> {
    check_quantile(q)?;
    Ok(pinball_subgradient(y, yhat, q))
}

/// Unchecked pinball loss for hot paths; `q` must already be validated.
pub(crate) fn pinball(y: f64, yhat: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0 && q < 1.0);
    if y > yhat {
        q * (y - yhat)
    } else {
        (1.0 - q) * (yhat - y)
    }
}

/// Unchecked pinball subgradient for hot paths.
pub(crate) fn pinball_subgradient(y: f64, yhat: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0 && q < 1.0);
    if yhat < y {
        -q
    } else if yhat > y {
        1.0 - q
    } else {
        0.0
    }
}
