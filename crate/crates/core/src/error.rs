use thiserror::Error;

/// Errors raised while building certificates, evaluating bounds or running the oracle.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("invalid moment constants: {0}")]
    InvalidMoments(String),

    #[error("value {value} is outside the data support of the {family} family")]
    OutsideSupport { family: &'static str, value: f64 },

    #[error("contraction c*h = {ch} is not below 1; this family needs hyperparameter restrictions")]
    FamilyRestriction { ch: f64 },

    #[error("degenerate drift center: a*f equals c*h ({0})")]
    DegenerateCenter(f64),

    #[error("drift rate gamma = {gamma} is outside [{ch}, 1)")]
    InvalidRate { gamma: f64, ch: f64 },

    #[error("invalid small set: w = {0} must be positive and finite")]
    InvalidSmallSet(f64),

    #[error("small set too small: w = {w} must exceed 2L/(1-gamma) = {threshold}")]
    SmallSetTooSmall { w: f64, threshold: f64 },

    #[error("invalid bound parameter: {0}")]
    InvalidParameter(String),

    #[error("bound is inapplicable: {0}")]
    InapplicableBound(String),

    #[error("no burn-in solution: {0}")]
    NoSolution(String),

    #[error("curve is not geometrically certified: {0}")]
    NotGeometric(String),

    #[error("infeasible search: {0}")]
    InfeasibleSearch(String),

    #[error("grid point x = {x} lies outside the small set [{lo}, {hi}]")]
    GridOutsideSmallSet { x: f64, lo: f64, hi: f64 },

    #[error("oracle is inapplicable: {0}")]
    InapplicableOracle(String),

    #[error("window [{start}, {end}) exceeds path of length {len}")]
    InsufficientPath { start: usize, end: usize, len: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
