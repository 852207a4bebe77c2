//! Monte Carlo checks of the polynomial moment constants for every family.

use gibbsbound::numeric::mean_and_stderr;
use gibbsbound::{sample_conditionals, ModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal, Poisson};

const DRAWS: usize = 100_000;
const Z: f64 = 4.0;

fn assert_moment(label: &str, draws: &[f64], predicted: f64) {
    let (mean, se) = mean_and_stderr(draws);
    assert!(
        (mean - predicted).abs() <= Z * se,
        "{label}: estimate {mean} vs predicted {predicted} (se {se})"
    );
}

/// Draws `X | θ` straight from the likelihood, bypassing the crate's sampler.
fn likelihood_draws(model: &ModelSpec, theta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match *model {
        ModelSpec::Gaussian { likelihood_var, .. } => {
            let d = Normal::new(theta, likelihood_var.sqrt()).unwrap();
            (0..DRAWS).map(|_| d.sample(rng)).collect()
        }
        ModelSpec::BetaBinomial { trials, .. } => {
            let d = Binomial::new(u64::from(trials), theta).unwrap();
            (0..DRAWS).map(|_| d.sample(rng) as f64).collect()
        }
        ModelSpec::PoissonGamma { .. } => {
            let d = Poisson::new(theta).unwrap();
            (0..DRAWS).map(|_| d.sample(rng)).collect()
        }
    }
}

fn check_family(model: ModelSpec, thetas: &[f64], xs: &[f64], seed: u64) {
    let mc = model.moments().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &theta in thetas {
        let x = likelihood_draws(&model, theta, &mut rng);
        let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert_moment(&format!("E(X|θ={theta})"), &x, mc.mean_x_given_theta(theta));
        assert_moment(&format!("E(X²|θ={theta})"), &x2, mc.second_moment_x_given_theta(theta));
    }
    for &x in xs {
        let th: Vec<f64> = (0..DRAWS)
            .map(|_| sample_conditionals(&model, x, &mut rng).unwrap().0)
            .collect();
        let th2: Vec<f64> = th.iter().map(|v| v * v).collect();
        assert_moment(&format!("E(θ|X={x})"), &th, mc.mean_theta_given_x(x));
        assert_moment(&format!("E(θ²|X={x})"), &th2, mc.second_moment_theta_given_x(x));
    }
}

#[test]
fn gaussian_worked_model() {
    check_family(ModelSpec::worked_gaussian(), &[-1.0, 0.0, 0.7], &[-2.0, 0.0, 1.5], 11);
}

#[test]
fn gaussian_shifted_prior() {
    check_family(
        ModelSpec::gaussian(1.5, 0.5, 2.0).unwrap(),
        &[-0.5, 3.0],
        &[-1.0, 4.0],
        12,
    );
}

#[test]
fn gaussian_half_variances() {
    check_family(ModelSpec::gaussian(0.0, 0.5, 0.5).unwrap(), &[0.2], &[0.0, 1.0], 13);
}

#[test]
fn beta_binomial() {
    check_family(
        ModelSpec::beta_binomial(1, 1.0, 1.0).unwrap(),
        &[0.1, 0.5, 0.9],
        &[0.0, 1.0],
        21,
    );
    check_family(
        ModelSpec::beta_binomial(5, 2.0, 3.0).unwrap(),
        &[0.25, 0.6],
        &[0.0, 2.0, 5.0],
        22,
    );
}

#[test]
fn poisson_gamma() {
    check_family(
        ModelSpec::poisson_gamma(1.0, 1.0).unwrap(),
        &[0.5, 2.0, 7.0],
        &[0.0, 3.0, 10.0],
        31,
    );
    check_family(
        ModelSpec::poisson_gamma(2.0, 3.0).unwrap(),
        &[1.0, 4.0],
        &[0.0, 6.0],
        32,
    );
}

#[test]
fn draws_stay_in_support() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bb = ModelSpec::beta_binomial(1, 1.0, 1.0).unwrap();
    let pg = ModelSpec::poisson_gamma(1.0, 1.0).unwrap();
    for _ in 0..10_000 {
        let (theta, y) = sample_conditionals(&bb, 0.0, &mut rng).unwrap();
        assert!(theta > 0.0 && theta < 1.0);
        assert!(y == 0.0 || y == 1.0);
        let (theta, y) = sample_conditionals(&pg, 3.0, &mut rng).unwrap();
        assert!(theta > 0.0);
        assert!(y >= 0.0 && y.fract() == 0.0);
    }
    assert!(sample_conditionals(&pg, -1.0, &mut rng).is_err());
    assert!(sample_conditionals(&bb, 2.0, &mut rng).is_err());
}
