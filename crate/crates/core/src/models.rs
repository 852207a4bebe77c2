//! Conjugate exponential-family pairs and their polynomial moment constants.
//!
//! For each supported pair `X | θ` (likelihood) and `θ` (conjugate prior) the
//! first two conditional moments are polynomials:
//!
//! ```text
//! E(X  | θ) = aθ + b          E(θ  | X) = fX + g
//! E(X² | θ) = cθ² + dθ + e    E(θ² | X) = hX² + jX + k
//! ```
//!
//! [`MomentConstants`] stores those ten coefficients. Families without a
//! built-in constructor can fill the struct directly; the contraction
//! requirement `c·h < 1` is enforced later when a drift certificate is built.

use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Gamma, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric;

/// The ten polynomial moment coefficients of a conjugate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentConstants {
    /// Slope of `E(X | θ)`.
    pub a: f64,
    /// Intercept of `E(X | θ)`.
    pub b: f64,
    /// Quadratic coefficient of `E(X² | θ)`.
    pub c: f64,
    /// Linear coefficient of `E(X² | θ)`.
    pub d: f64,
    /// Constant of `E(X² | θ)`.
    pub e: f64,
    /// Slope of `E(θ | X)`.
    pub f: f64,
    /// Intercept of `E(θ | X)`.
    pub g: f64,
    /// Quadratic coefficient of `E(θ² | X)`.
    pub h: f64,
    /// Linear coefficient of `E(θ² | X)`.
    pub j: f64,
    /// Constant of `E(θ² | X)`.
    pub k: f64,
}

impl MomentConstants {
    /// The drift contraction `c·h`.
    pub fn contraction(&self) -> f64 {
        self.c * self.h
    }

    pub fn mean_x_given_theta(&self, theta: f64) -> f64 {
        self.a * theta + self.b
    }

    pub fn second_moment_x_given_theta(&self, theta: f64) -> f64 {
        (self.c * theta + self.d) * theta + self.e
    }

    pub fn mean_theta_given_x(&self, x: f64) -> f64 {
        self.f * x + self.g
    }

    pub fn second_moment_theta_given_x(&self, x: f64) -> f64 {
        (self.h * x + self.j) * x + self.k
    }

    /// Named view used for flat exports.
    pub fn named(&self) -> [(&'static str, f64); 10] {
        [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
            ("e", self.e),
            ("f", self.f),
            ("g", self.g),
            ("h", self.h),
            ("j", self.j),
            ("k", self.k),
        ]
    }

    /// Checks `c, h ≥ 0` and that both conditional variances implied by the
    /// constants are nonnegative on the supplied grids.
    pub fn validate(&self, theta_grid: &[f64], x_grid: &[f64]) -> Result<()> {
        let named = self.named();
        if let Some((name, _)) = named.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidMoments(format!("constant {name} is not finite")));
        }
        if self.c < 0.0 || self.h < 0.0 {
            return Err(Error::InvalidMoments(format!(
                "c = {} and h = {} must be nonnegative",
                self.c, self.h
            )));
        }
        for &theta in theta_grid {
            let m1 = self.mean_x_given_theta(theta);
            let m2 = self.second_moment_x_given_theta(theta);
            if m2 - m1 * m1 < -1e-12 * m2.abs().max(1.0) {
                return Err(Error::InvalidMoments(format!(
                    "Var(X | θ = {theta}) = {} is negative",
                    m2 - m1 * m1
                )));
            }
        }
        for &x in x_grid {
            let m1 = self.mean_theta_given_x(x);
            let m2 = self.second_moment_theta_given_x(x);
            if m2 - m1 * m1 < -1e-12 * m2.abs().max(1.0) {
                return Err(Error::InvalidMoments(format!(
                    "Var(θ | X = {x}) = {} is negative",
                    m2 - m1 * m1
                )));
            }
        }
        Ok(())
    }
}

fn require_positive(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidHyperparameter(format!(
            "{name} must be positive and finite, got {value}"
        )))
    }
}

/// Moment constants of `X | θ ∼ N(θ, σ²)`, `θ ∼ N(ν, τ²)`.
pub fn moments_gaussian(prior_mean: f64, likelihood_var: f64, prior_var: f64) -> Result<MomentConstants> {
    require_positive("sigma2", likelihood_var)?;
    require_positive("tau2", prior_var)?;
    if !prior_mean.is_finite() {
        return Err(Error::InvalidHyperparameter(format!(
            "nu must be finite, got {prior_mean}"
        )));
    }
    let total = likelihood_var + prior_var;
    let f = prior_var / total;
    let g = likelihood_var * prior_mean / total;
    let post_var = likelihood_var * prior_var / total;
    Ok(MomentConstants {
        a: 1.0,
        b: 0.0,
        c: 1.0,
        d: 0.0,
        e: likelihood_var,
        f,
        g,
        h: f * f,
        j: 2.0 * f * g,
        k: g * g + post_var,
    })
}

/// Moment constants of `X | θ ∼ Binomial(n, θ)`, `θ ∼ Beta(α, β)`.
pub fn moments_beta_binomial(trials: u32, alpha: f64, beta: f64) -> Result<MomentConstants> {
    if trials == 0 {
        return Err(Error::InvalidHyperparameter("n must be at least 1".into()));
    }
    require_positive("alpha", alpha)?;
    require_positive("beta", beta)?;
    let n = f64::from(trials);
    let s = alpha + beta + n;
    let s2 = s * (s + 1.0);
    Ok(MomentConstants {
        a: n,
        b: 0.0,
        c: n * (n - 1.0),
        d: n,
        e: 0.0,
        f: 1.0 / s,
        g: alpha / s,
        h: 1.0 / s2,
        j: (2.0 * alpha + 1.0) / s2,
        k: alpha * (alpha + 1.0) / s2,
    })
}

/// Moment constants of `X | θ ∼ Poisson(θ)`, `θ ∼ Gamma(α, rate β)`.
///
/// The posterior is `Gamma(α + X, rate β + 1)`.
pub fn moments_poisson_gamma(shape: f64, rate: f64) -> Result<MomentConstants> {
    require_positive("alpha", shape)?;
    require_positive("beta", rate)?;
    let r = rate + 1.0;
    let r2 = r * r;
    Ok(MomentConstants {
        a: 1.0,
        b: 0.0,
        c: 1.0,
        d: 1.0,
        e: 0.0,
        f: 1.0 / r,
        g: shape / r,
        h: 1.0 / r2,
        j: (2.0 * shape + 1.0) / r2,
        k: shape * (shape + 1.0) / r2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    BetaBinomial,
    PoissonGamma,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::BetaBinomial => "beta_binomial",
            Family::PoissonGamma => "poisson_gamma",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "beta_binomial" => Ok(Family::BetaBinomial),
            "poisson_gamma" => Ok(Family::PoissonGamma),
            other => Err(Error::InvalidHyperparameter(format!("unknown family '{other}'"))),
        }
    }
}

/// A concrete conjugate model. Construct through the validating constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Gaussian {
        prior_mean: f64,
        likelihood_var: f64,
        prior_var: f64,
    },
    BetaBinomial {
        trials: u32,
        alpha: f64,
        beta: f64,
    },
    PoissonGamma {
        shape: f64,
        rate: f64,
    },
}

impl ModelSpec {
    pub fn gaussian(prior_mean: f64, likelihood_var: f64, prior_var: f64) -> Result<Self> {
        moments_gaussian(prior_mean, likelihood_var, prior_var)?;
        Ok(ModelSpec::Gaussian {
            prior_mean,
            likelihood_var,
            prior_var,
        })
    }

    pub fn beta_binomial(trials: u32, alpha: f64, beta: f64) -> Result<Self> {
        moments_beta_binomial(trials, alpha, beta)?;
        Ok(ModelSpec::BetaBinomial { trials, alpha, beta })
    }

    pub fn poisson_gamma(shape: f64, rate: f64) -> Result<Self> {
        moments_poisson_gamma(shape, rate)?;
        Ok(ModelSpec::PoissonGamma { shape, rate })
    }

    /// `X | θ ∼ N(θ, 1/4)`, `θ ∼ N(0, 1/4)`.
    pub fn worked_gaussian() -> Self {
        ModelSpec::Gaussian {
            prior_mean: 0.0,
            likelihood_var: 0.25,
            prior_var: 0.25,
        }
    }

    pub fn family(&self) -> Family {
        match self {
            ModelSpec::Gaussian { .. } => Family::Gaussian,
            ModelSpec::BetaBinomial { .. } => Family::BetaBinomial,
            ModelSpec::PoissonGamma { .. } => Family::PoissonGamma,
        }
    }

    pub fn moments(&self) -> Result<MomentConstants> {
        match *self {
            ModelSpec::Gaussian {
                prior_mean,
                likelihood_var,
                prior_var,
            } => moments_gaussian(prior_mean, likelihood_var, prior_var),
            ModelSpec::BetaBinomial { trials, alpha, beta } => moments_beta_binomial(trials, alpha, beta),
            ModelSpec::PoissonGamma { shape, rate } => moments_poisson_gamma(shape, rate),
        }
    }

    /// Whether `x` is a legal state of the x-chain.
    pub fn in_support(&self, x: f64) -> bool {
        match *self {
            ModelSpec::Gaussian { .. } => x.is_finite(),
            ModelSpec::BetaBinomial { trials, .. } => x.fract() == 0.0 && x >= 0.0 && x <= f64::from(trials),
            ModelSpec::PoissonGamma { .. } => x.is_finite() && x.fract() == 0.0 && x >= 0.0,
        }
    }

    pub fn check_support(&self, x: f64) -> Result<()> {
        if self.in_support(x) {
            Ok(())
        } else {
            Err(Error::OutsideSupport {
                family: self.family().name(),
                value: x,
            })
        }
    }

    /// Default grids over the parameter and data supports, used to validate
    /// moment constants.
    pub fn test_grids(&self) -> (Vec<f64>, Vec<f64>) {
        match *self {
            ModelSpec::Gaussian {
                prior_mean,
                likelihood_var,
                prior_var,
            } => {
                let spread = 10.0 * (likelihood_var + prior_var).sqrt();
                let grid: Vec<f64> = (0..=40)
                    .map(|i| prior_mean - spread + spread * f64::from(i) / 20.0)
                    .collect();
                (grid.clone(), grid)
            }
            ModelSpec::BetaBinomial { trials, .. } => (
                (1..100).map(|i| f64::from(i) / 100.0).collect(),
                (0..=trials).map(f64::from).collect(),
            ),
            ModelSpec::PoissonGamma { .. } => (
                (1..=200).map(|i| f64::from(i) / 10.0).collect(),
                (0..=60).map(f64::from).collect(),
            ),
        }
    }

    /// Stationary law of the x-chain.
    pub fn marginal(&self) -> MarginalLaw {
        match *self {
            ModelSpec::Gaussian {
                prior_mean,
                likelihood_var,
                prior_var,
            } => MarginalLaw::Normal {
                mean: prior_mean,
                variance: likelihood_var + prior_var,
            },
            ModelSpec::BetaBinomial { trials, alpha, beta } => MarginalLaw::BetaBinomial { trials, alpha, beta },
            ModelSpec::PoissonGamma { shape, rate } => MarginalLaw::NegativeBinomial {
                size: shape,
                success: rate / (rate + 1.0),
            },
        }
    }
}

/// One two-block Gibbs scan from state `x`: draw `θ | x`, then `Y | θ`.
pub fn sample_conditionals<R: Rng + ?Sized>(model: &ModelSpec, x: f64, rng: &mut R) -> Result<(f64, f64)> {
    model.check_support(x)?;
    let out = match *model {
        ModelSpec::Gaussian {
            prior_mean,
            likelihood_var,
            prior_var,
        } => {
            let total = likelihood_var + prior_var;
            let post_mean = (prior_var * x + likelihood_var * prior_mean) / total;
            let post_sd = (likelihood_var * prior_var / total).sqrt();
            let theta = post_mean + post_sd * rng.sample::<f64, _>(rand_distr::StandardNormal);
            let y = theta + likelihood_var.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
            (theta, y)
        }
        ModelSpec::BetaBinomial { trials, alpha, beta } => {
            let n = f64::from(trials);
            let theta = Beta::new(alpha + x, beta + n - x)
                .map_err(|e| Error::InvalidHyperparameter(e.to_string()))?
                .sample(rng);
            let y = Binomial::new(u64::from(trials), theta)
                .map_err(|e| Error::InvalidHyperparameter(e.to_string()))?
                .sample(rng);
            (theta, y as f64)
        }
        ModelSpec::PoissonGamma { shape, rate } => {
            let theta = Gamma::new(shape + x, 1.0 / (rate + 1.0))
                .map_err(|e| Error::InvalidHyperparameter(e.to_string()))?
                .sample(rng);
            let y = if theta > 0.0 {
                Poisson::new(theta)
                    .map_err(|e| Error::InvalidHyperparameter(e.to_string()))?
                    .sample(rng)
            } else {
                0.0
            };
            (theta, y)
        }
    };
    Ok(out)
}

/// Stationary law `m(·)` of the x-chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum MarginalLaw {
    Normal {
        mean: f64,
        variance: f64,
    },
    BetaBinomial {
        trials: u32,
        alpha: f64,
        beta: f64,
    },
    /// Number of failures before `size` successes with success probability `success`.
    NegativeBinomial {
        size: f64,
        success: f64,
    },
}

impl MarginalLaw {
    pub fn is_discrete(&self) -> bool {
        !matches!(self, MarginalLaw::Normal { .. })
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalLaw::Normal { mean, .. } => mean,
            MarginalLaw::BetaBinomial { trials, alpha, beta } => f64::from(trials) * alpha / (alpha + beta),
            MarginalLaw::NegativeBinomial { size, success } => size * (1.0 - success) / success,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MarginalLaw::Normal { variance, .. } => variance,
            MarginalLaw::BetaBinomial { trials, alpha, beta } => {
                let n = f64::from(trials);
                let s = alpha + beta;
                n * alpha * beta * (s + n) / (s * s * (s + 1.0))
            }
            MarginalLaw::NegativeBinomial { size, success } => size * (1.0 - success) / (success * success),
        }
    }

    /// Density (continuous) or probability mass (discrete) at `x`.
    pub fn density(&self, x: f64) -> f64 {
        match *self {
            MarginalLaw::Normal { mean, variance } => numeric::gaussian_pdf(x, mean, variance),
            _ => {
                if x.fract() != 0.0 || x < 0.0 {
                    0.0
                } else {
                    self.pmf(x as u64)
                }
            }
        }
    }

    /// Probability mass at an integer atom; zero for the continuous law.
    pub fn pmf(&self, x: u64) -> f64 {
        match *self {
            MarginalLaw::Normal { .. } => 0.0,
            MarginalLaw::BetaBinomial { trials, alpha, beta } => {
                if x > u64::from(trials) {
                    return 0.0;
                }
                beta_binomial_pmf(u64::from(trials), alpha, beta)[x as usize]
            }
            MarginalLaw::NegativeBinomial { size, success } => {
                let k = x as f64;
                (libm::lgamma(k + size) - libm::lgamma(size) - libm::lgamma(k + 1.0)
                    + size * success.ln()
                    + k * (1.0 - success).ln())
                .exp()
            }
        }
    }

    /// `P(X ≤ x)` for the normal law.
    pub fn normal_cdf(&self, x: f64) -> Option<f64> {
        match *self {
            MarginalLaw::Normal { mean, variance } => Some(numeric::normal_cdf((x - mean) / variance.sqrt())),
            _ => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            MarginalLaw::Normal { mean, variance } => Normal::new(mean, variance.sqrt())
                .expect("validated normal law")
                .sample(rng),
            MarginalLaw::BetaBinomial { trials, alpha, beta } => {
                let theta = Beta::new(alpha, beta).expect("validated beta prior").sample(rng);
                Binomial::new(u64::from(trials), theta)
                    .expect("probability in [0, 1]")
                    .sample(rng) as f64
            }
            MarginalLaw::NegativeBinomial { size, success } => {
                let theta = Gamma::new(size, (1.0 - success) / success)
                    .expect("validated gamma prior")
                    .sample(rng);
                if theta > 0.0 {
                    Poisson::new(theta).expect("positive rate").sample(rng)
                } else {
                    0.0
                }
            }
        }
    }
}

/// Full pmf of BetaBinomial(n, α, β) over `0..=n`, built by the ratio
/// recurrence so no gamma functions are involved.
pub fn beta_binomial_pmf(trials: u64, alpha: f64, beta: f64) -> Vec<f64> {
    let n = trials as f64;
    let mut p0 = 1.0;
    for i in 0..trials {
        let i = i as f64;
        p0 *= (beta + i) / (alpha + beta + i);
    }
    let mut out = Vec::with_capacity(trials as usize + 1);
    out.push(p0);
    for y in 0..trials {
        let y = y as f64;
        let prev = *out.last().unwrap();
        out.push(prev * (n - y) / (y + 1.0) * (y + alpha) / (n - y - 1.0 + beta));
    }
    out
}
