//! Convergence certificates for two-block Gibbs samplers on conjugate
//! exponential-family models.
//!
//! The crate builds a quadratic drift condition from the polynomial moment
//! constants of a conjugate pair ([`drift`]), a minorization condition for
//! Gaussian x-chains ([`minorization`]), turns the pair into a total-variation
//! bound and a burn-in count ([`bounds`], [`search`]), and checks all of it
//! against exact Gaussian laws and simulation ([`oracle`]).

pub mod bounds;
pub mod drift;
pub mod error;
pub mod minorization;
pub mod models;
pub mod numeric;
pub mod oracle;
pub mod search;

pub use bounds::{
    certificate_from_curve, dksc_curve, rosenthal_curve, solve_n_star, BoundCurve, DkscCurve,
    GeometricErgodicityCertificate, RosenthalCurve, RosenthalInputs,
};
pub use drift::{build_drift, build_drift_tightest, verify_drift_identity, DriftCertificate, DriftCheck};
pub use error::{Error, Result};
pub use minorization::{
    build_minorization, check_domination, transition_density, Ar1Law, DominationReport, MinorizationCertificate,
};
pub use models::{
    moments_beta_binomial, moments_gaussian, moments_poisson_gamma, sample_conditionals, Family, MarginalLaw,
    ModelSpec, MomentConstants,
};
pub use search::{grid_search, optimize, EpsilonSource, SearchGrids, SearchOutcome, SearchProblem};
