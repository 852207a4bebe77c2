//! Total-variation bound curves and the burn-in solver.
//!
//! Two curve forms are supported:
//!
//! * the drift/minorization (Rosenthal) bound
//!   `(1 − ε)^{r l} + (1 + L/(1 − γ) + V(x₀)) (α^{−(1−r)} A^r)^l`
//!   with `α = (1 + w)/(1 + 2L + γw)` and `A = 1 + 2(γw + L)`;
//! * the closed-form Gaussian bound for `ν = 0`, `σ² + τ² = 1/2`,
//!   `½ √(exp(x² 2^{1−2l} / (1 + 2^{−2l})) / √(1 − 2^{−4l}) − 1)`.
//!
//! Raw values are never clipped to 1; [`BoundCurve::is_vacuous`] reports when
//! a value carries no information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Largest iteration count the burn-in solver will consider.
pub const N_STAR_CAP: u64 = 1_000_000;

/// Free parameters and drift/minorization constants of the Rosenthal bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenthalInputs {
    pub r: f64,
    /// Drift rate γ.
    pub rate: f64,
    /// Drift constant L.
    pub constant: f64,
    /// Small-set parameter w.
    pub small_set: f64,
    pub epsilon: f64,
    /// `V(x₀)` at the start point.
    pub start_v: f64,
}

impl RosenthalInputs {
    pub fn small_set_threshold(&self) -> f64 {
        2.0 * self.constant / (1.0 - self.rate)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::InvalidParameter(format!("r = {} must lie in (0, 1)", self.r)));
        }
        if !(self.rate >= 0.0 && self.rate < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must lie in [0, 1)",
                self.rate
            )));
        }
        if !self.constant.is_finite() {
            return Err(Error::InvalidParameter(format!("L = {} must be finite", self.constant)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must lie in (0, 1]",
                self.epsilon
            )));
        }
        if !(self.start_v >= 0.0 && self.start_v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "V(x0) = {} must be finite and nonnegative",
                self.start_v
            )));
        }
        let threshold = self.small_set_threshold();
        if !(self.small_set.is_finite() && self.small_set > 0.0 && self.small_set > threshold) {
            return Err(Error::SmallSetTooSmall {
                w: self.small_set,
                threshold,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenthalCurve {
    pub inputs: RosenthalInputs,
    /// `(1 − ε)^r`.
    pub minorization_base: f64,
    /// `α^{−(1−r)} A^r`.
    pub drift_base: f64,
    pub alpha: f64,
    pub big_a: f64,
    /// `1 + L/(1 − γ) + V(x₀)`.
    pub coefficient: f64,
}

impl RosenthalCurve {
    pub fn value(&self, l: u64) -> f64 {
        let l = l as f64;
        self.minorization_base.powf(l) + self.coefficient * self.drift_base.powf(l)
    }

    /// Both geometric bases are below one.
    pub fn is_contracting(&self) -> bool {
        self.minorization_base < 1.0 && self.drift_base < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DkscCurve {
    pub start: f64,
}

impl DkscCurve {
    /// Infinite at `l = 0`, where the closed form is undefined.
    pub fn value(&self, l: u64) -> f64 {
        if l == 0 {
            return f64::INFINITY;
        }
        let two_l = 2.0 * l as f64;
        let q = (-two_l * std::f64::consts::LN_2).exp(); // 2^{−2l}
        let drift_term = self.start * self.start * 2.0 * q / (1.0 + q);
        let exponent = drift_term - 0.5 * (-(q * q)).ln_1p();
        0.5 * exponent.exp_m1().max(0.0).sqrt()
    }
}

/// A map `l ↦` upper bound on `‖P^l(x₀, ·) − π‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum BoundCurve {
    Rosenthal(RosenthalCurve),
    Dksc(DkscCurve),
}

impl BoundCurve {
    pub fn value(&self, l: u64) -> f64 {
        match self {
            BoundCurve::Rosenthal(c) => c.value(l),
            BoundCurve::Dksc(c) => c.value(l),
        }
    }

    /// Whether the curve tends to zero.
    pub fn converges(&self) -> bool {
        match self {
            BoundCurve::Rosenthal(c) => c.is_contracting(),
            BoundCurve::Dksc(_) => true,
        }
    }

    /// Raw value at `l` is at least one and therefore says nothing.
    pub fn is_vacuous(&self, l: u64) -> bool {
        self.value(l) >= 1.0
    }

    pub fn form(&self) -> &'static str {
        match self {
            BoundCurve::Rosenthal(_) => "rosenthal",
            BoundCurve::Dksc(_) => "dksc",
        }
    }
}

/// Builds the drift/minorization bound curve.
///
/// A curve whose drift base is not below one is still returned; check
/// [`RosenthalCurve::is_contracting`] before relying on it.
pub fn rosenthal_curve(inputs: RosenthalInputs) -> Result<RosenthalCurve> {
    inputs.validate()?;
    let RosenthalInputs {
        r,
        rate,
        constant,
        small_set: w,
        epsilon,
        start_v,
    } = inputs;
    let alpha = (1.0 + w) / (1.0 + 2.0 * constant + rate * w);
    let big_a = 1.0 + 2.0 * (rate * w + constant);
    let minorization_base = (r * (-epsilon).ln_1p()).exp();
    let drift_base = (-(1.0 - r) * alpha.ln() + r * big_a.ln()).exp();
    Ok(RosenthalCurve {
        inputs,
        minorization_base,
        drift_base,
        alpha,
        big_a,
        coefficient: 1.0 + constant / (1.0 - rate) + start_v,
    })
}

/// Tolerance used when checking the hyperparameter preconditions of the closed-form Gaussian bound.
const DKSC_PRECONDITION_TOL: f64 = 1e-12;

/// Closed-form Gaussian bound started at `start`.
///
/// Only defined for Gaussian models with `ν = 0` and `σ² + τ² = 1/2`.
pub fn dksc_curve(start: f64, model: &ModelSpec) -> Result<DkscCurve> {
    match *model {
        ModelSpec::Gaussian {
            prior_mean,
            likelihood_var,
            prior_var,
        } => {
            if prior_mean.abs() > DKSC_PRECONDITION_TOL {
                return Err(Error::InapplicableBound(format!("needs nu = 0, got {prior_mean}")));
            }
            let total = likelihood_var + prior_var;
            if (total - 0.5).abs() > DKSC_PRECONDITION_TOL {
                return Err(Error::InapplicableBound(format!(
                    "needs sigma2 + tau2 = 1/2, got {total}"
                )));
            }
            if !start.is_finite() {
                return Err(Error::InvalidParameter(format!("start point {start} is not finite")));
            }
            Ok(DkscCurve { start })
        }
        _ => Err(Error::InapplicableBound(format!(
            "needs a gaussian model, got {}",
            model.family().name()
        ))),
    }
}

/// Smallest `l ≥ 1` with `curve(l) ≤ omega`.
///
/// Relies on the curve being nonincreasing in `l`: brackets by doubling, then
/// bisects on the integers. Gives up past [`N_STAR_CAP`].
pub fn solve_n_star(curve: &BoundCurve, omega: f64) -> Result<u64> {
    if !(omega > 0.0 && omega < 1.0) {
        return Err(Error::InvalidParameter(format!("omega = {omega} must lie in (0, 1)")));
    }
    if !curve.converges() {
        let detail = match curve {
            BoundCurve::Rosenthal(c) => format!(
                "bases (1-eps)^r = {:.9}, alpha^-(1-r) A^r = {:.9}; both must be below 1",
                c.minorization_base, c.drift_base
            ),
            BoundCurve::Dksc(_) => "curve does not converge".to_string(),
        };
        return Err(Error::NoSolution(detail));
    }
    if curve.value(1) <= omega {
        return Ok(1);
    }
    let mut lo = 1u64;
    let mut hi = 2u64;
    while curve.value(hi) > omega {
        if hi >= N_STAR_CAP {
            return Err(Error::NoSolution(format!(
                "curve stays above {omega} up to l = {N_STAR_CAP} (value {:.3e})",
                curve.value(N_STAR_CAP)
            )));
        }
        lo = hi;
        hi = (hi * 2).min(N_STAR_CAP);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if curve.value(mid) <= omega {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `‖P^l(x₀, ·) − π‖ ≤ M₀ t^l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricErgodicityCertificate {
    pub coefficient: f64,
    pub rate: f64,
}

impl GeometricErgodicityCertificate {
    pub fn envelope(&self, l: u64) -> f64 {
        self.coefficient * self.rate.powf(l as f64)
    }
}

/// Collapses a contracting Rosenthal curve to `M₀ = 1 + coeff`, `t = max(bases)`.
pub fn certificate_from_curve(curve: &BoundCurve) -> Result<GeometricErgodicityCertificate> {
    match curve {
        BoundCurve::Rosenthal(c) => {
            if !c.is_contracting() {
                return Err(Error::NotGeometric(format!(
                    "bases {} and {} must both be below 1",
                    c.minorization_base, c.drift_base
                )));
            }
            if c.coefficient.is_nan() || c.coefficient < 1.0 {
                return Err(Error::NotGeometric(format!(
                    "coefficient {} is below its lower bound 1 + L/(1-gamma)",
                    c.coefficient
                )));
            }
            Ok(GeometricErgodicityCertificate {
                coefficient: 1.0 + c.coefficient,
                rate: c.minorization_base.max(c.drift_base),
            })
        }
        BoundCurve::Dksc(_) => Err(Error::NotGeometric(
            "only drift/minorization curves carry a geometric envelope".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::minorization::{minorization_mass, Ar1Law};
    use approx::assert_abs_diff_eq;

    fn worked_inputs() -> RosenthalInputs {
        let law = Ar1Law::from_model(&ModelSpec::worked_gaussian()).unwrap();
        RosenthalInputs {
            r: 0.1895820,
            rate: 0.25,
            constant: 0.375,
            small_set: 2.203030,
            epsilon: minorization_mass(&law, 2.203030),
            start_v: 0.0,
        }
    }

    #[test]
    fn worked_bases_and_coefficient() {
        let c = rosenthal_curve(worked_inputs()).unwrap();
        assert!((c.minorization_base - 0.952697).abs() <= 1e-5);
        assert!((c.drift_base - 0.9328785).abs() <= 1e-5);
        assert_abs_diff_eq!(c.minorization_base, 0.952_697_054_335_625_8, epsilon = 1e-12);
        assert_abs_diff_eq!(c.drift_base, 0.932_878_452_322_273_3, epsilon = 1e-12);
        assert_abs_diff_eq!(c.coefficient, 1.5);
        assert_abs_diff_eq!(c.value(0), 2.5);
        let c = BoundCurve::Rosenthal(c);
        assert!(c.value(99) <= 0.00980);
        assert_abs_diff_eq!(c.value(99), 0.009_795_840_552_665_793, epsilon = 1e-13);
        assert!(c.is_vacuous(0) && !c.is_vacuous(99));
    }

    #[test]
    fn start_point_enters_coefficient() {
        let mut inputs = worked_inputs();
        inputs.start_v = 4.0;
        let c = rosenthal_curve(inputs).unwrap();
        assert_abs_diff_eq!(c.coefficient, 5.5);
    }

    #[test]
    fn input_validation() {
        let mut bad = worked_inputs();
        bad.small_set = 1.0; // threshold is exactly 1
        assert!(matches!(rosenthal_curve(bad), Err(Error::SmallSetTooSmall { .. })));
        let mut bad = worked_inputs();
        bad.r = 1.0;
        assert!(rosenthal_curve(bad).is_err());
        let mut bad = worked_inputs();
        bad.epsilon = 0.0;
        assert!(rosenthal_curve(bad).is_err());
        let mut bad = worked_inputs();
        bad.start_v = -1.0;
        assert!(rosenthal_curve(bad).is_err());
    }

    #[test]
    fn non_contracting_curve_is_returned_but_unsolvable() {
        let mut inputs = worked_inputs();
        inputs.r = 0.9;
        let c = rosenthal_curve(inputs).unwrap();
        assert!(!c.is_contracting());
        let err = solve_n_star(&BoundCurve::Rosenthal(c), 0.01).unwrap_err();
        assert!(matches!(err, Error::NoSolution(_)));
        assert!(certificate_from_curve(&BoundCurve::Rosenthal(c)).is_err());
    }

    #[test]
    fn n_star_for_worked_rosenthal() {
        let c = BoundCurve::Rosenthal(rosenthal_curve(worked_inputs()).unwrap());
        assert_eq!(solve_n_star(&c, 0.01).unwrap(), 99);
        assert!(c.value(98) > 0.01);
        assert_eq!(solve_n_star(&c, 0.999).unwrap(), linear_n_star(&c, 0.999));
    }

    fn linear_n_star(c: &BoundCurve, omega: f64) -> u64 {
        (1..).find(|&l| c.value(l) <= omega).unwrap()
    }

    #[test]
    fn dksc_values() {
        let model = ModelSpec::worked_gaussian();
        let c = dksc_curve(0.0, &model).unwrap();
        assert_abs_diff_eq!(c.value(1), 0.090_547_720_828_086_7, epsilon = 1e-13);
        assert_abs_diff_eq!(c.value(2), 0.022_129_537_592_543_5, epsilon = 1e-13);
        assert_abs_diff_eq!(c.value(3), 0.005_524_777_569_962_34, epsilon = 1e-13);
        assert_eq!(solve_n_star(&BoundCurve::Dksc(c), 0.01).unwrap(), 3);
        let mut prev = f64::INFINITY;
        for l in 1..=60 {
            let v = c.value(l);
            assert!(v <= prev && v >= 0.0);
            prev = v;
        }
        assert!(prev < 1e-30);
        assert!(c.value(0).is_infinite());
    }

    #[test]
    fn dksc_start_point_raises_bound() {
        let model = ModelSpec::worked_gaussian();
        let at0 = dksc_curve(0.0, &model).unwrap();
        let at2 = dksc_curve(2.0, &model).unwrap();
        for l in 1..20 {
            assert!(at2.value(l) > at0.value(l));
        }
    }

    #[test]
    fn dksc_preconditions() {
        assert!(dksc_curve(0.0, &ModelSpec::gaussian(0.0, 0.1, 0.4).unwrap()).is_ok());
        assert!(matches!(
            dksc_curve(0.0, &ModelSpec::gaussian(0.1, 0.25, 0.25).unwrap()),
            Err(Error::InapplicableBound(_))
        ));
        assert!(dksc_curve(0.0, &ModelSpec::gaussian(0.0, 0.5, 0.5).unwrap()).is_err());
        assert!(dksc_curve(0.0, &ModelSpec::poisson_gamma(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn omega_above_first_value_gives_one() {
        let c = BoundCurve::Dksc(DkscCurve { start: 0.0 });
        assert_eq!(solve_n_star(&c, 0.5).unwrap(), 1);
        assert!(solve_n_star(&c, 0.0).is_err());
        assert!(solve_n_star(&c, 1.0).is_err());
    }

    #[test]
    fn geometric_certificate() {
        let c = BoundCurve::Rosenthal(rosenthal_curve(worked_inputs()).unwrap());
        let cert = certificate_from_curve(&c).unwrap();
        assert_abs_diff_eq!(cert.coefficient, 2.5);
        assert_abs_diff_eq!(cert.rate, 0.952_697_054_335_625_8, epsilon = 1e-12);
        for l in 0..=200 {
            assert!(cert.envelope(l) >= c.value(l));
        }
        assert!(certificate_from_curve(&BoundCurve::Dksc(DkscCurve { start: 0.0 })).is_err());
    }
}
