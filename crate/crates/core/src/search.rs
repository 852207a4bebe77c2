//! Grid search over the free parameters `(r, γ, w)` of the drift/minorization bound.
//!
//! Every cell is a pure evaluation. Cells are scored by `n*`, then by the bound
//! value at `n*`, then lexicographically by `(r, γ, w)`; this is a total order,
//! so the winner does not depend on evaluation order. The incumbent trace is
//! built by folding the cells in canonical grid order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::bounds::{rosenthal_curve, solve_n_star, BoundCurve, RosenthalCurve, RosenthalInputs};
use crate::drift::{build_drift, build_drift_tightest, DriftCertificate};
use crate::error::{Error, Result};
use crate::minorization::{minorization_mass, Ar1Law};
use crate::models::{ModelSpec, MomentConstants};

/// Where the minorization mass for a given `w` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum EpsilonSource {
    /// Closed form `2Φ(−|ρ|√w / s)` for a Gaussian x-chain.
    Gaussian(Ar1Law),
    /// A user-certified mass, taken as valid for every `w` searched.
    Fixed { epsilon: f64 },
}

impl EpsilonSource {
    pub fn epsilon(&self, w: f64) -> f64 {
        match self {
            EpsilonSource::Gaussian(law) => minorization_mass(law, w),
            EpsilonSource::Fixed { epsilon } => *epsilon,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchProblem {
    pub moments: MomentConstants,
    pub epsilon: EpsilonSource,
    pub start: f64,
    pub omega: f64,
}

impl SearchProblem {
    /// Gaussian models use the closed-form minorization; the other families
    /// need `fixed_epsilon`.
    pub fn from_model(model: &ModelSpec, start: f64, omega: f64, fixed_epsilon: Option<f64>) -> Result<Self> {
        model.check_support(start)?;
        if !(omega > 0.0 && omega < 1.0) {
            return Err(Error::InvalidParameter(format!("omega = {omega} must lie in (0, 1)")));
        }
        let epsilon = match (fixed_epsilon, model) {
            (Some(eps), _) => {
                if !(eps > 0.0 && eps <= 1.0) {
                    return Err(Error::InvalidParameter(format!("epsilon = {eps} must lie in (0, 1]")));
                }
                EpsilonSource::Fixed { epsilon: eps }
            }
            (None, ModelSpec::Gaussian { .. }) => EpsilonSource::Gaussian(Ar1Law::from_model(model)?),
            (None, other) => {
                return Err(Error::InvalidParameter(format!(
                    "the {} family has no closed-form minorization; supply epsilon",
                    other.family().name()
                )))
            }
        };
        Ok(Self {
            moments: model.moments()?,
            epsilon,
            start,
            omega,
        })
    }

    /// Assembles the bound inputs for one `(r, γ, w)` cell.
    pub fn inputs(&self, r: f64, rate: f64, w: f64) -> Result<RosenthalInputs> {
        let drift = build_drift(&self.moments, rate)?;
        Ok(RosenthalInputs {
            r,
            rate,
            constant: drift.constant,
            small_set: w,
            epsilon: self.epsilon.epsilon(w),
            start_v: drift.v(self.start),
        })
    }

    fn tightest_drift(&self) -> Result<DriftCertificate> {
        build_drift_tightest(&self.moments)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaGrid {
    Values {
        values: Vec<f64>,
    },
    /// `ch + i (1 − ch) / points` for `i = 0..points`.
    FromContraction {
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WGrid {
    Values {
        values: Vec<f64>,
    },
    /// `points` log-spaced values in `(2L/(1 − γ), upper]`, per γ.
    LogAboveThreshold {
        upper: f64,
        points: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrids {
    pub r: Vec<f64>,
    pub gamma: GammaGrid,
    pub w: WGrid,
}

impl SearchGrids {
    /// `r ∈ {0.01, …, 0.99}`, 50 rates from `ch`, 200 log-spaced `w` up to 20.
    pub fn default_coarse() -> Self {
        Self {
            r: (1..=99).map(|i| f64::from(i) / 100.0).collect(),
            gamma: GammaGrid::FromContraction { points: 50 },
            w: WGrid::LogAboveThreshold {
                upper: 20.0,
                points: 200,
            },
        }
    }

    /// A single `(r, γ, w)` cell.
    pub fn pinned(r: f64, rate: f64, w: f64) -> Self {
        Self {
            r: vec![r],
            gamma: GammaGrid::Values { values: vec![rate] },
            w: WGrid::Values { values: vec![w] },
        }
    }

    fn gamma_values(&self, ch: f64) -> Vec<f64> {
        match &self.gamma {
            GammaGrid::Values { values } => values.clone(),
            GammaGrid::FromContraction { points } => (0..*points)
                .map(|i| ch + i as f64 * (1.0 - ch) / *points as f64)
                .collect(),
        }
    }

    fn w_values(&self, threshold: f64) -> Vec<f64> {
        match &self.w {
            WGrid::Values { values } => values.clone(),
            WGrid::LogAboveThreshold { upper, points } => {
                let lo = threshold.max(f64::MIN_POSITIVE);
                if upper.is_nan() || *upper <= lo {
                    return Vec::new();
                }
                let ratio = (upper / lo).ln();
                (1..=*points)
                    .map(|j| {
                        if j == *points {
                            *upper
                        } else {
                            lo * (ratio * j as f64 / *points as f64).exp()
                        }
                    })
                    .collect()
            }
        }
    }
}

/// One evaluated cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub r: f64,
    pub rate: f64,
    pub small_set: f64,
    pub epsilon: f64,
    pub minorization_base: f64,
    pub drift_base: f64,
    pub coefficient: f64,
    pub n_star: u64,
    pub bound: f64,
}

impl Candidate {
    fn ranking(&self, other: &Self) -> Ordering {
        self.n_star
            .cmp(&other.n_star)
            .then(self.bound.total_cmp(&other.bound))
            .then(self.r.total_cmp(&other.r))
            .then(self.rate.total_cmp(&other.rate))
            .then(self.small_set.total_cmp(&other.small_set))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub stage: String,
    pub cell: usize,
    pub candidate: Candidate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: RosenthalInputs,
    pub curve: RosenthalCurve,
    pub n_star: u64,
    pub bound_at_n_star: f64,
    pub cells: usize,
    pub feasible: usize,
    pub trace: Vec<TraceEntry>,
}

impl SearchOutcome {
    pub fn bound_curve(&self) -> BoundCurve {
        BoundCurve::Rosenthal(self.curve)
    }
}

fn evaluate(problem: &SearchProblem, r: f64, rate: f64, w: f64) -> Option<Candidate> {
    let inputs = problem.inputs(r, rate, w).ok()?;
    let curve = rosenthal_curve(inputs).ok()?;
    let n_star = solve_n_star(&BoundCurve::Rosenthal(curve), problem.omega).ok()?;
    Some(Candidate {
        r,
        rate,
        small_set: w,
        epsilon: inputs.epsilon,
        minorization_base: curve.minorization_base,
        drift_base: curve.drift_base,
        coefficient: curve.coefficient,
        n_star,
        bound: curve.value(n_star),
    })
}

struct StageResult {
    best: Option<Candidate>,
    cells: usize,
    feasible: usize,
    trace: Vec<TraceEntry>,
}

fn run_stage(problem: &SearchProblem, grids: &SearchGrids, stage: &str) -> Result<StageResult> {
    let ch = problem.moments.contraction();
    let constant = problem.tightest_drift()?.constant;
    let mut cells: Vec<(f64, f64, f64)> = Vec::new();
    for &r in &grids.r {
        for rate in grids.gamma_values(ch) {
            let threshold = 2.0 * constant / (1.0 - rate);
            for w in grids.w_values(threshold) {
                cells.push((r, rate, w));
            }
        }
    }
    let evaluated: Vec<Option<Candidate>> = cells
        .par_iter()
        .map(|&(r, rate, w)| evaluate(problem, r, rate, w))
        .collect();

    let mut best: Option<Candidate> = None;
    let mut trace = Vec::new();
    let mut feasible = 0;
    for (cell, cand) in evaluated.iter().enumerate() {
        let Some(cand) = cand else { continue };
        feasible += 1;
        let improves = best.is_none_or(|b| cand.ranking(&b) == Ordering::Less);
        if improves {
            best = Some(*cand);
            trace.push(TraceEntry {
                stage: stage.to_string(),
                cell,
                candidate: *cand,
            });
        }
    }
    Ok(StageResult {
        best,
        cells: cells.len(),
        feasible,
        trace,
    })
}

fn finish(
    problem: &SearchProblem,
    best: Candidate,
    cells: usize,
    feasible: usize,
    trace: Vec<TraceEntry>,
) -> Result<SearchOutcome> {
    let inputs = problem.inputs(best.r, best.rate, best.small_set)?;
    let curve = rosenthal_curve(inputs)?;
    Ok(SearchOutcome {
        best: inputs,
        curve,
        n_star: best.n_star,
        bound_at_n_star: best.bound,
        cells,
        feasible,
        trace,
    })
}

/// Exhaustive search over the given grids.
///
/// Cells with `w ≤ 2L/(1 − γ)`, `γ ∉ [ch, 1)`, `r ∉ (0, 1)` or a
/// non-contracting curve are skipped as infeasible.
pub fn grid_search(problem: &SearchProblem, grids: &SearchGrids) -> Result<SearchOutcome> {
    let stage = run_stage(problem, grids, "grid")?;
    let best = stage.best.ok_or_else(|| {
        Error::InfeasibleSearch(format!(
            "none of the {} grid cells yields a convergent bound",
            stage.cells
        ))
    })?;
    finish(problem, best, stage.cells, stage.feasible, stage.trace)
}

/// Default coarse grids followed by one local refinement around the incumbent:
/// `r` in steps of 1e-4 within ±0.01, 21 rates within one coarse γ step and
/// 41 log-spaced `w` within one coarse `w` step on either side.
pub fn optimize(problem: &SearchProblem) -> Result<SearchOutcome> {
    let coarse = SearchGrids::default_coarse();
    let stage = run_stage(problem, &coarse, "coarse")?;
    let incumbent = stage
        .best
        .ok_or_else(|| Error::InfeasibleSearch(format!("none of the {} default cells is feasible", stage.cells)))?;

    let ch = problem.moments.contraction();
    let gamma_step = (1.0 - ch) / 50.0;
    let threshold = 2.0 * problem.tightest_drift()?.constant / (1.0 - incumbent.rate);
    let w_log_step = (20.0 / threshold.max(f64::MIN_POSITIVE)).ln() / 200.0;

    let refine = SearchGrids {
        r: (-100..=100)
            .map(|i| incumbent.r + f64::from(i) * 1e-4)
            .filter(|&r| r > 0.0 && r < 1.0)
            .collect(),
        gamma: GammaGrid::Values {
            values: (-10..=10)
                .map(|i| incumbent.rate + f64::from(i) * gamma_step / 10.0)
                .filter(|&g| g >= ch && g < 1.0)
                .collect(),
        },
        w: WGrid::Values {
            values: (-20..=20)
                .map(|i| incumbent.small_set * (f64::from(i) * w_log_step / 20.0).exp())
                .collect(),
        },
    };
    let fine = run_stage(problem, &refine, "refine")?;
    let best = match fine.best {
        Some(b) if b.ranking(&incumbent) == Ordering::Less => b,
        _ => incumbent,
    };
    let mut trace = stage.trace;
    trace.extend(
        fine.trace
            .into_iter()
            .filter(|t| t.candidate.ranking(&incumbent) == Ordering::Less),
    );
    finish(
        problem,
        best,
        stage.cells + fine.cells,
        stage.feasible + fine.feasible,
        trace,
    )
}
