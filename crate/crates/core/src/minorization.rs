//! Minorization of Gaussian x-chains on quadratic small sets.
//!
//! A Gaussian conjugate pair gives an AR(1) x-chain,
//! `Y | x ∼ N(ρx + offset, s²)`. On `C = {x : (x − u)² ≤ w}` the conditional
//! means sweep `ρu + offset ± |ρ|√w`, and the pointwise infimum of the
//! transition density over `C` is a normal density evaluated at distance
//! `|y − ρu − offset| + |ρ|√w`. Its total mass is `ε = 2Φ(−|ρ|√w / s)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::numeric::{self, normal_cdf};

/// One-step law of an AR(1) x-chain: `Y | x ∼ N(ρx + offset, variance)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Law {
    pub rho: f64,
    pub offset: f64,
    pub variance: f64,
}

impl Ar1Law {
    pub fn new(rho: f64, offset: f64, variance: f64) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) || !rho.is_finite() || !offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "AR(1) law needs finite rho, offset and positive variance (got {rho}, {offset}, {variance})"
            )));
        }
        Ok(Self { rho, offset, variance })
    }

    /// x-chain of a Gaussian model: `ρ = f`, `offset = g`, `s² = σ² + σ²τ²/(σ² + τ²)`.
    pub fn from_model(model: &ModelSpec) -> Result<Self> {
        match *model {
            ModelSpec::Gaussian {
                likelihood_var,
                prior_var,
                ..
            } => {
                let mc = model.moments()?;
                let post_var = likelihood_var * prior_var / (likelihood_var + prior_var);
                Self::new(mc.f, mc.g, likelihood_var + post_var)
            }
            _ => Err(Error::InapplicableBound(format!(
                "closed-form minorization needs a gaussian model, got {}",
                model.family().name()
            ))),
        }
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn conditional_mean(&self, x: f64) -> f64 {
        self.rho * x + self.offset
    }

    /// Stationary law `N(offset / (1 − ρ), s² / (1 − ρ²))`, when `|ρ| < 1`.
    pub fn stationary(&self) -> Option<(f64, f64)> {
        (self.rho.abs() < 1.0).then(|| {
            (
                self.offset / (1.0 - self.rho),
                self.variance / (1.0 - self.rho * self.rho),
            )
        })
    }
}

/// Transition density `k_x(y)`.
pub fn transition_density(law: &Ar1Law, x: f64, y: f64) -> f64 {
    numeric::gaussian_pdf(y, law.conditional_mean(x), law.variance)
}

/// `ε = 2Φ(−|ρ|√w / s)`.
pub fn minorization_mass(law: &Ar1Law, w: f64) -> f64 {
    2.0 * normal_cdf(-law.rho.abs() * w.sqrt() / law.sd())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinorizationCertificate {
    /// Small-set parameter: `C = {x : (x − center)² ≤ w}`.
    pub small_set: f64,
    pub center: f64,
    /// Minorization mass ε.
    pub epsilon: f64,
    pub rho: f64,
    pub offset: f64,
    pub variance: f64,
}

impl MinorizationCertificate {
    pub fn law(&self) -> Ar1Law {
        Ar1Law {
            rho: self.rho,
            offset: self.offset,
            variance: self.variance,
        }
    }

    /// Endpoints `center ∓ √w` of the small set.
    pub fn small_set_bounds(&self) -> (f64, f64) {
        let r = self.small_set.sqrt();
        (self.center - r, self.center + r)
    }

    pub fn contains(&self, x: f64) -> bool {
        let (lo, hi) = self.small_set_bounds();
        let slack = 1e-12 * (1.0 + self.center.abs() + self.small_set.sqrt());
        x >= lo - slack && x <= hi + slack
    }

    /// Center of the two residual lobes, `ρu + offset`.
    pub fn lobe_center(&self) -> f64 {
        self.rho * self.center + self.offset
    }

    /// Unnormalized minorant `g(y) = inf_{x ∈ C} k_x(y)`.
    pub fn minorant(&self, y: f64) -> f64 {
        let dist = (y - self.lobe_center()).abs() + self.rho.abs() * self.small_set.sqrt();
        numeric::normal_pdf(dist / self.variance.sqrt()) / self.variance.sqrt()
    }

    /// Residual density `q(y) = g(y) / ε₀` where `ε₀` is the mass implied by
    /// the law and small set. It ignores the stored `epsilon`, so tampering
    /// with that field shows up in [`check_domination`].
    pub fn residual_density(&self, y: f64) -> f64 {
        self.minorant(y) / minorization_mass(&self.law(), self.small_set)
    }
}

/// Builds the minorization certificate on `{x : (x − center)² ≤ w}`.
pub fn build_minorization(law: &Ar1Law, center: f64, w: f64) -> Result<MinorizationCertificate> {
    if !(w.is_finite() && w > 0.0) {
        return Err(Error::InvalidSmallSet(w));
    }
    Ok(MinorizationCertificate {
        small_set: w,
        center,
        epsilon: minorization_mass(law, w),
        rho: law.rho,
        offset: law.offset,
        variance: law.variance,
    })
}

/// Worst margin of `k_x(y) − ε q(y)` over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub worst_margin: f64,
    pub argmin_x: f64,
    pub argmin_y: f64,
    pub cells: usize,
}

impl DominationReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.worst_margin >= -tol
    }
}

/// Evaluates `min k_x(y) − ε q(y)` over `x_grid × y_grid`; every `x` must lie in `C`.
pub fn check_domination(
    cert: &MinorizationCertificate,
    law: &Ar1Law,
    x_grid: &[f64],
    y_grid: &[f64],
) -> Result<DominationReport> {
    let (lo, hi) = cert.small_set_bounds();
    if let Some(&x) = x_grid.iter().find(|&&x| !cert.contains(x)) {
        return Err(Error::GridOutsideSmallSet { x, lo, hi });
    }
    let mut report = DominationReport {
        worst_margin: f64::INFINITY,
        argmin_x: f64::NAN,
        argmin_y: f64::NAN,
        cells: x_grid.len() * y_grid.len(),
    };
    let weighted: Vec<f64> = y_grid
        .iter()
        .map(|&y| cert.epsilon * cert.residual_density(y))
        .collect();
    for &x in x_grid {
        for (&y, &eq) in y_grid.iter().zip(&weighted) {
            let margin = transition_density(law, x, y) - eq;
            if margin < report.worst_margin {
                report.worst_margin = margin;
                report.argmin_x = x;
                report.argmin_y = y;
            }
        }
    }
    Ok(report)
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::integrate_real_line;
    use approx::assert_abs_diff_eq;

    fn worked() -> Ar1Law {
        Ar1Law::from_model(&ModelSpec::worked_gaussian()).unwrap()
    }

    #[test]
    fn worked_law() {
        let law = worked();
        assert_abs_diff_eq!(law.rho, 0.5);
        assert_abs_diff_eq!(law.offset, 0.0);
        assert_abs_diff_eq!(law.variance, 0.375, epsilon = 1e-16);
        let (m, v) = law.stationary().unwrap();
        assert_abs_diff_eq!(m, 0.0);
        assert_abs_diff_eq!(v, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn transition_density_closed_form() {
        let law = worked();
        let peak = (4.0 / (3.0 * std::f64::consts::PI)).sqrt();
        assert_abs_diff_eq!(transition_density(&law, 0.0, 0.0), peak, epsilon = 1e-15);
        assert_abs_diff_eq!(peak, 0.651_470_015_870_56, epsilon = 1e-13);
        assert_abs_diff_eq!(transition_density(&law, 1.0, 0.5), peak, epsilon = 1e-15);
        for (x, y) in [(0.3f64, -1.2f64), (-2.0, 0.7), (1.1, 1.1)] {
            let reference = peak * (-4.0 / 3.0 * (y - 0.5 * x).powi(2)).exp();
            assert_abs_diff_eq!(transition_density(&law, x, y), reference, epsilon = 1e-15);
        }
        for &x in &[-3.0, 0.0, 2.5] {
            let q = integrate_real_line(|y| transition_density(&law, x, y), 1e-13);
            assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-11);
        }
    }

    #[test]
    fn worked_epsilon_values() {
        let law = worked();
        let cert = build_minorization(&law, 0.0, 2.203030).unwrap();
        assert_abs_diff_eq!(cert.epsilon, 0.225_553_022_470_106_86, epsilon = 1e-13);
        let eps3 = build_minorization(&law, 0.0, 3.0).unwrap().epsilon;
        assert_abs_diff_eq!(eps3, 0.157_299_207_050_285_13, epsilon = 1e-13);
        let tiny = build_minorization(&law, 0.0, 1e-14).unwrap().epsilon;
        assert!(tiny > 1.0 - 1e-6 && tiny <= 1.0);
    }

    #[test]
    fn epsilon_matches_closed_form_special_case() {
        let law = worked();
        for i in 1..200 {
            let w = f64::from(i) * 0.05;
            let general = minorization_mass(&law, w);
            let reference = 2.0 * normal_cdf(-(2.0 * w / 3.0).sqrt());
            assert_abs_diff_eq!(general, reference, epsilon = 1e-12);
        }
    }

    #[test]
    fn epsilon_is_strictly_decreasing() {
        let law = worked();
        let mut prev = 1.0;
        for i in 1..400 {
            let eps = minorization_mass(&law, f64::from(i) * 0.1);
            assert!(eps < prev);
            prev = eps;
        }
        assert!(minorization_mass(&law, 1e4) < 1e-20);
    }

    #[test]
    fn invalid_small_set() {
        let law = worked();
        assert!(matches!(
            build_minorization(&law, 0.0, 0.0),
            Err(Error::InvalidSmallSet(_))
        ));
        assert!(matches!(
            build_minorization(&law, 0.0, -1.0),
            Err(Error::InvalidSmallSet(_))
        ));
        assert!(build_minorization(&law, 0.0, f64::INFINITY).is_err());
    }

    #[test]
    fn residual_density_normalizes() {
        for law in [worked(), Ar1Law::new(-0.7, 1.3, 2.0).unwrap()] {
            for &(u, w) in &[(0.0, 2.203030), (1.0, 0.4), (-2.0, 6.0)] {
                let cert = build_minorization(&law, u, w).unwrap();
                let q = integrate_real_line(|y| cert.residual_density(y), 1e-13);
                assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn minorant_matches_closed_form() {
        let cert = build_minorization(&worked(), 0.0, 2.203030).unwrap();
        let rw = 2.203030f64.sqrt();
        for i in -30..=30 {
            let y = f64::from(i) * 0.2;
            let sign = if y >= 0.0 { 1.0 } else { -1.0 };
            let reference =
                (4.0 / (3.0 * std::f64::consts::PI)).sqrt() * (-4.0 / 3.0 * (y + 0.5 * rw * sign).powi(2)).exp();
            assert_abs_diff_eq!(cert.minorant(y), reference, epsilon = 1e-15);
        }
    }

    #[test]
    fn domination_on_grid() {
        let law = worked();
        let cert = build_minorization(&law, 0.0, 2.203030).unwrap();
        let (lo, hi) = cert.small_set_bounds();
        let report = check_domination(&cert, &law, &linspace(lo, hi, 41), &linspace(-6.0, 6.0, 121)).unwrap();
        assert!(report.passes(1e-12), "{report:?}");
        // interior point keeps a strict margin
        let interior = check_domination(&cert, &law, &[0.0], &linspace(-6.0, 6.0, 121)).unwrap();
        assert!(interior.worst_margin > 0.0);
        // boundary binds at y = 0
        let at_edge = transition_density(&law, hi, 0.0) - cert.epsilon * cert.residual_density(0.0);
        assert!(at_edge.abs() < 1e-12);
    }

    #[test]
    fn domination_rejects_points_outside_small_set() {
        let law = worked();
        let cert = build_minorization(&law, 0.0, 1.0).unwrap();
        assert!(matches!(
            check_domination(&cert, &law, &[1.5], &[0.0]),
            Err(Error::GridOutsideSmallSet { .. })
        ));
    }

    #[test]
    fn inflated_epsilon_breaks_domination() {
        let law = worked();
        let mut cert = build_minorization(&law, 0.0, 2.203030).unwrap();
        cert.epsilon *= 1.5;
        let (lo, hi) = cert.small_set_bounds();
        let report = check_domination(&cert, &law, &linspace(lo, hi, 21), &linspace(-6.0, 6.0, 61)).unwrap();
        assert!(!report.passes(1e-12));
    }

    #[test]
    fn non_gaussian_models_have_no_closed_form() {
        assert!(Ar1Law::from_model(&ModelSpec::poisson_gamma(1.0, 1.0).unwrap()).is_err());
    }
}
