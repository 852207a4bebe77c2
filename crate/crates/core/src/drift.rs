//! Quadratic drift certificates `E[V(Y) | x] ≤ γ V(x) + L` with `V(y) = (y − u)²`.
//!
//! For a conjugate pair the expectation is in fact an equality with rate
//! `c·h`: `E[V(Y) | x] = ch·V(x) + L`. Any `γ ∈ [ch, 1)` then gives a valid
//! drift condition, with `u` and `L` unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{beta_binomial_pmf, sample_conditionals, ModelSpec, MomentConstants};

/// Relative tolerance for the finite-summation identity check.
pub const EXACT_IDENTITY_RTOL: f64 = 1e-12;
/// Allowed |z| for the Monte Carlo identity check.
pub const MC_IDENTITY_Z: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCertificate {
    /// Center `u` of `V(y) = (y − u)²`.
    pub center: f64,
    /// `c·h`, the exact contraction of the quadratic identity.
    pub contraction: f64,
    /// Chosen rate γ.
    pub rate: f64,
    /// Additive constant `L`.
    pub constant: f64,
}

impl DriftCertificate {
    pub fn v(&self, x: f64) -> f64 {
        (x - self.center).powi(2)
    }

    /// `ch·V(x) + L`, the exact conditional expectation of `V(Y)`.
    pub fn expected_v(&self, x: f64) -> f64 {
        self.contraction * self.v(x) + self.constant
    }

    /// `2L / (1 − γ)`: small sets `{V ≤ w}` must use `w` strictly above this.
    pub fn small_set_threshold(&self) -> f64 {
        2.0 * self.constant / (1.0 - self.rate)
    }

    /// Flags the case `L < 0`, which the construction does not rule out.
    pub fn has_negative_constant(&self) -> bool {
        self.constant < 0.0
    }

    /// Same certificate with a different rate in `[ch, 1)`.
    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        check_rate(rate, self.contraction)?;
        Ok(Self { rate, ..*self })
    }
}

fn check_rate(rate: f64, ch: f64) -> Result<()> {
    if rate.is_finite() && rate >= ch && rate < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidRate { gamma: rate, ch })
    }
}

/// Builds the quadratic drift certificate for rate `rate`.
pub fn build_drift(mc: &MomentConstants, rate: f64) -> Result<DriftCertificate> {
    let ch = mc.contraction();
    if ch.is_nan() || ch >= 1.0 {
        return Err(Error::FamilyRestriction { ch });
    }
    let denom = mc.a * mc.f - ch;
    if denom == 0.0 {
        return Err(Error::DegenerateCenter(ch));
    }
    check_rate(rate, ch)?;
    let u = (mc.d * mc.f + mc.c * mc.j) / (2.0 * denom);
    let constant = mc.c * mc.k + mc.g * mc.d + mc.e + u * u * (1.0 - ch) - 2.0 * u * (mc.g * mc.a + mc.b);
    Ok(DriftCertificate {
        center: u,
        contraction: ch,
        rate,
        constant,
    })
}

/// [`build_drift`] at the tightest admissible rate `γ = ch`.
pub fn build_drift_tightest(mc: &MomentConstants) -> Result<DriftCertificate> {
    build_drift(mc, mc.contraction())
}

/// One row of a drift identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftCheck {
    pub x: f64,
    pub predicted: f64,
    pub estimate: f64,
    /// Zero when `exact` is set.
    pub std_error: f64,
    /// Discrepancy over standard error; for exact rows, the relative error.
    pub z_score: f64,
    /// Computed by finite summation rather than simulation.
    pub exact: bool,
}

impl DriftCheck {
    pub fn passes(&self) -> bool {
        if self.exact {
            self.z_score <= EXACT_IDENTITY_RTOL
        } else {
            self.z_score.abs() <= MC_IDENTITY_Z
        }
    }
}

/// Checks `E[V(Y) | x] = ch·V(x) + L` at each grid point.
///
/// Beta/Binomial chains are summed exactly over `{0, …, n}`; the other
/// families are simulated with `n_samples` draws per point. Grid point `i`
/// uses its own ChaCha stream `i` under `seed`, so the report does not depend
/// on evaluation order.
pub fn verify_drift_identity(
    model: &ModelSpec,
    cert: &DriftCertificate,
    x_grid: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<DriftCheck>> {
    for &x in x_grid {
        model.check_support(x)?;
    }
    x_grid
        .par_iter()
        .enumerate()
        .map(|(i, &x)| {
            let predicted = cert.expected_v(x);
            if let ModelSpec::BetaBinomial { trials, alpha, beta } = *model {
                let n = f64::from(trials);
                let pmf = beta_binomial_pmf(u64::from(trials), alpha + x, beta + n - x);
                let estimate: f64 = pmf.iter().enumerate().map(|(y, p)| p * cert.v(y as f64)).sum();
                let rel = (estimate - predicted).abs() / predicted.abs().max(f64::MIN_POSITIVE);
                return Ok(DriftCheck {
                    x,
                    predicted,
                    estimate,
                    std_error: 0.0,
                    z_score: rel,
                    exact: true,
                });
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for _ in 0..n_samples {
                let (_, y) = sample_conditionals(model, x, &mut rng)?;
                let v = cert.v(y);
                sum += v;
                sum_sq += v * v;
            }
            let n = n_samples as f64;
            let estimate = sum / n;
            let var = (sum_sq - n * estimate * estimate) / (n - 1.0);
            let std_error = (var.max(0.0) / n).sqrt();
            Ok(DriftCheck {
                x,
                predicted,
                estimate,
                std_error,
                z_score: (estimate - predicted) / std_error,
                exact: false,
            })
        })
        .collect()
}
