//! Ground truth for Gaussian x-chains: exact l-step laws, exact total
//! variation between Gaussians, chain simulation and histogram TV estimates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::minorization::Ar1Law;
use crate::models::{sample_conditionals, MarginalLaw, ModelSpec};
use crate::numeric::normal_mass;

/// Replicate count below which [`empirical_tv`] attaches a variance warning.
pub const MIN_REPLICATES: usize = 10_000;

/// `N(mean, variance)`; `variance == 0` is a point mass at `mean`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLaw {
    pub mean: f64,
    pub variance: f64,
}

impl GaussianLaw {
    pub fn is_point_mass(&self) -> bool {
        self.variance == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LStepLaw {
    pub l: u64,
    pub law: GaussianLaw,
}

/// Law of `X_l | X_0 = start` for a Gaussian model.
///
/// Mean `μ + (x₀ − μ)ρ^l`, variance `v_∞ (1 − ρ^{2l})` with `(μ, v_∞)` the
/// stationary law.
pub fn exact_l_step_law(model: &ModelSpec, start: f64, l: u64) -> Result<LStepLaw> {
    let law = Ar1Law::from_model(model).map_err(|_| {
        Error::InapplicableOracle(format!(
            "exact l-step law needs a gaussian model, got {}",
            model.family().name()
        ))
    })?;
    let (mu, v_inf) = law
        .stationary()
        .ok_or_else(|| Error::InapplicableOracle("x-chain is not stationary".into()))?;
    let (rho_l, rho_2l) = if l <= i32::MAX as u64 / 2 {
        (law.rho.powi(l as i32), law.rho.powi(2 * l as i32))
    } else {
        (0.0, 0.0)
    };
    Ok(LStepLaw {
        l,
        law: GaussianLaw {
            mean: mu + (start - mu) * rho_l,
            variance: v_inf * (1.0 - rho_2l),
        },
    })
}

/// Total variation `½∫|p − q|` between two Gaussian laws.
///
/// The densities cross at most twice; the distance is the difference of the
/// two laws' masses between the crossings. Both masses are evaluated as
/// narrow-interval integrals so nearly equal laws keep full relative
/// precision. A point mass against a continuous law is at distance 1.
pub fn exact_tv(a: &GaussianLaw, b: &GaussianLaw) -> f64 {
    match (a.is_point_mass(), b.is_point_mass()) {
        (true, true) => return if a.mean == b.mean { 0.0 } else { 1.0 },
        (true, false) | (false, true) => return 1.0,
        _ => {}
    }
    let (narrow, wide) = if a.variance <= b.variance { (a, b) } else { (b, a) };
    let delta = narrow.mean - wide.mean;
    let s1 = narrow.variance.sqrt();
    let s2 = wide.variance.sqrt();
    let d = (wide.variance - narrow.variance) / wide.variance;
    if d == 0.0 {
        return libm::erf(delta.abs() / (2.0 * std::f64::consts::SQRT_2 * s1));
    }
    let sqrt_kappa = s1 / s2;
    // Crossings in the narrow law's standard coordinates solve
    // d z² − 2βz − c = 0.
    let beta = delta * s1 / wide.variance;
    let c = delta * delta / wide.variance - (-d).ln_1p();
    let disc = (beta * beta + d * c).sqrt();
    let (z_lo, z_hi) = if beta >= 0.0 {
        (-c / (beta + disc), (beta + disc) / d)
    } else {
        ((beta - disc) / d, -c / (beta - disc))
    };
    let shrink = d / (1.0 + sqrt_kappa); // 1 − √κ
    let gap = |z: f64| z * shrink - delta / s2;
    let upper = |z: f64| {
        let g = gap(z);
        normal_mass(z - g, g)
    };
    (upper(z_hi) - upper(z_lo)).clamp(0.0, 1.0)
}

/// A simulated x-chain path `X_0, …, X_length` with the θ draws in between.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainPath {
    pub start: f64,
    pub seed: u64,
    /// `X_0 = start` followed by one state per transition.
    pub states: Vec<f64>,
    /// θ drawn during transition `i → i + 1`.
    pub thetas: Vec<f64>,
}

impl ChainPath {
    pub fn transitions(&self) -> usize {
        self.thetas.len()
    }
}

/// Runs `length` Gibbs scans from `start` with a ChaCha stream seeded by `seed`.
pub fn simulate_chain(model: &ModelSpec, start: f64, length: usize, seed: u64) -> Result<ChainPath> {
    if length == 0 {
        return Err(Error::InvalidParameter("chain length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut states = Vec::with_capacity(length + 1);
    let mut thetas = Vec::with_capacity(length);
    let mut x = start;
    states.push(x);
    for _ in 0..length {
        let (theta, next) = sample_conditionals(model, x, &mut rng)?;
        thetas.push(theta);
        states.push(next);
        x = next;
    }
    Ok(ChainPath {
        start,
        seed,
        states,
        thetas,
    })
}

/// `(1/n) Σ_{i=B}^{n+B−1} g(X_i)`.
pub fn ergodic_average<G: Fn(f64) -> f64>(path: &ChainPath, g: G, burn_in: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("window length n must be at least 1".into()));
    }
    let end = burn_in + n;
    if end > path.states.len() {
        return Err(Error::InsufficientPath {
            start: burn_in,
            end,
            len: path.states.len(),
        });
    }
    Ok(path.states[burn_in..end].iter().map(|&x| g(x)).sum::<f64>() / n as f64)
}

/// States after `l` scans of `replicates` independent chains from `start`.
///
/// Replicate `i` draws from ChaCha stream `i` under `seed`.
pub fn replicate_states(model: &ModelSpec, start: f64, l: usize, replicates: usize, seed: u64) -> Result<Vec<f64>> {
    model.check_support(start)?;
    (0..replicates)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut x = start;
            for _ in 0..l {
                x = sample_conditionals(model, x, &mut rng)?.1;
            }
            Ok(x)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BinRule {
    /// Width `2 IQR n^{−1/3}`.
    FreedmanDiaconis,
    /// `⌈log₂ n⌉ + 1` bins over the sample range.
    Sturges,
    Count {
        bins: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSensitivity {
    pub width_multiplier: f64,
    pub bins: usize,
    pub estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalTv {
    pub estimate: f64,
    pub bins: usize,
    /// `None` for discrete references, which are compared atom by atom.
    pub bin_width: Option<f64>,
    pub sensitivity: Vec<BinSensitivity>,
    pub warning: Option<String>,
}

/// Width multipliers reported in [`EmpiricalTv::sensitivity`].
pub const SENSITIVITY_MULTIPLIERS: [f64; 5] = [0.5, 1.0, 2.0, 4.0, 8.0];

/// Histogram estimate of the TV distance between a sample and a reference law.
///
/// Continuous references are binned on the sample range (with two unbounded
/// tail bins that only the reference can occupy); discrete references are
/// compared atom by atom. The estimate is biased: sampling noise pushes it up,
/// coarse bins pull it down.
pub fn empirical_tv(samples: &[f64], reference: &MarginalLaw, rule: BinRule) -> Result<EmpiricalTv> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("empirical TV needs at least one sample".into()));
    }
    let warning = (samples.len() < MIN_REPLICATES).then(|| {
        format!(
            "only {} replicates (< {MIN_REPLICATES}); histogram TV has high variance",
            samples.len()
        )
    });
    if reference.is_discrete() {
        return Ok(discrete_tv(samples, reference, warning));
    }
    let MarginalLaw::Normal { mean, variance } = *reference else {
        unreachable!("continuous references are normal")
    };
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let lo = sorted[0];
    let hi = sorted[sorted.len() - 1];
    let sd = variance.sqrt();
    let base_width = match rule {
        BinRule::FreedmanDiaconis => {
            let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
            let iqr = if iqr > 0.0 {
                iqr
            } else {
                2.0 * 0.674_489_750_196_081_7 * sd
            };
            2.0 * iqr * n.powf(-1.0 / 3.0)
        }
        BinRule::Sturges => range_or(hi - lo, sd) / (n.log2().ceil() + 1.0),
        BinRule::Count { bins } => range_or(hi - lo, sd) / bins.max(1) as f64,
    };
    let histogram = |width: f64| -> (f64, usize) {
        let (start, bins) = if hi > lo {
            (lo, (((hi - lo) / width).ceil() as usize).clamp(1, 10_000_000))
        } else {
            (lo - 0.5 * width, 1)
        };
        let mut counts = vec![0usize; bins];
        for &x in &sorted {
            let idx = (((x - start) / width).floor() as usize).min(bins - 1);
            counts[idx] += 1;
        }
        let z = |x: f64| (x - mean) / sd;
        let mut total = 0.0;
        let mut inside = 0.0;
        for (i, &count) in counts.iter().enumerate() {
            let left = start + i as f64 * width;
            let right = if i + 1 == bins {
                start + bins as f64 * width
            } else {
                left + width
            };
            let q = normal_mass(z(left), z(right) - z(left));
            inside += q;
            total += (count as f64 / n - q).abs();
        }
        total += (1.0 - inside).max(0.0);
        (0.5 * total, bins)
    };
    let (estimate, bins) = histogram(base_width);
    let sensitivity = SENSITIVITY_MULTIPLIERS
        .iter()
        .map(|&m| {
            let (estimate, bins) = histogram(base_width * m);
            BinSensitivity {
                width_multiplier: m,
                bins,
                estimate,
            }
        })
        .collect();
    Ok(EmpiricalTv {
        estimate,
        bins,
        bin_width: Some(base_width),
        sensitivity,
        warning,
    })
}

fn range_or(range: f64, sd: f64) -> f64 {
    if range > 0.0 {
        range
    } else {
        sd
    }
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn discrete_tv(samples: &[f64], reference: &MarginalLaw, warning: Option<String>) -> EmpiricalTv {
    let mut counts = std::collections::BTreeMap::<i64, usize>::new();
    let mut off_lattice = 0usize;
    for &x in samples {
        if x.fract() == 0.0 && x >= 0.0 {
            *counts.entry(x as i64).or_default() += 1;
        } else {
            off_lattice += 1;
        }
    }
    let n = samples.len() as f64;
    let mut total = off_lattice as f64 / n;
    let mut seen = 0.0;
    for (&x, &count) in &counts {
        let q = reference.pmf(x as u64);
        seen += q;
        total += (count as f64 / n - q).abs();
    }
    total += (1.0 - seen).max(0.0);
    let estimate = 0.5 * total;
    EmpiricalTv {
        estimate,
        bins: counts.len(),
        bin_width: None,
        sensitivity: vec![BinSensitivity {
            width_multiplier: 1.0,
            bins: counts.len(),
            estimate,
        }],
        warning,
    }
}
