use gibbsbound::minorization::minorization_mass;
use gibbsbound::numeric::{gaussian_pdf, integrate};
use gibbsbound::oracle::{exact_tv, GaussianLaw};
use gibbsbound::*;
use proptest::prelude::*;

fn quadrature_tv(a: &GaussianLaw, b: &GaussianLaw) -> f64 {
    let lo = (a.mean - 14.0 * a.variance.sqrt()).min(b.mean - 14.0 * b.variance.sqrt());
    let hi = (a.mean + 14.0 * a.variance.sqrt()).max(b.mean + 14.0 * b.variance.sqrt());
    let f = |x: f64| (gaussian_pdf(x, a.mean, a.variance) - gaussian_pdf(x, b.mean, b.variance)).abs();
    // break points where log p = log q, from the quadratic in x
    let qa = 1.0 / a.variance - 1.0 / b.variance;
    let qb = -2.0 * (a.mean / a.variance - b.mean / b.variance);
    let qc = a.mean * a.mean / a.variance - b.mean * b.mean / b.variance + (a.variance / b.variance).ln();
    let mut knots = vec![lo];
    if qa.abs() < 1e-14 {
        if qb != 0.0 {
            knots.push(-qc / qb);
        }
    } else {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc > 0.0 {
            knots.push((-qb - disc.sqrt()) / (2.0 * qa));
            knots.push((-qb + disc.sqrt()) / (2.0 * qa));
        }
    }
    knots.push(hi);
    knots.retain(|k| *k >= lo && *k <= hi);
    knots.sort_by(f64::total_cmp);
    0.5 * knots
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], 1e-14).value)
        .sum::<f64>()
}

prop_compose! {
    fn gaussian_law()(mean in -3.0f64..3.0, variance in 0.05f64..4.0) -> GaussianLaw {
        GaussianLaw { mean, variance }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exact_tv_is_a_symmetric_distance(a in gaussian_law(), b in gaussian_law()) {
        let ab = exact_tv(&a, &b);
        let ba = exact_tv(&b, &a);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((ab - ba).abs() < 1e-14);
        prop_assert_eq!(exact_tv(&a, &a), 0.0);
        prop_assert!((ab - quadrature_tv(&a, &b)).abs() < 1e-9, "{} vs {}", ab, quadrature_tv(&a, &b));
    }

    #[test]
    fn exact_tv_zero_only_for_equal_laws(a in gaussian_law(), shift in 1e-3f64..1.0) {
        let b = GaussianLaw { mean: a.mean + shift, variance: a.variance };
        prop_assert!(exact_tv(&a, &b) > 0.0);
        let c = GaussianLaw { mean: a.mean, variance: a.variance * (1.0 + shift) };
        prop_assert!(exact_tv(&a, &c) > 0.0);
    }

    #[test]
    fn epsilon_decreases_in_w(w in 1e-3f64..30.0, dw in 1e-3f64..5.0, rho in 0.05f64..0.95, s2 in 0.1f64..3.0) {
        let law = Ar1Law::new(rho, 0.0, s2).unwrap();
        let (e1, e2) = (minorization_mass(&law, w), minorization_mass(&law, w + dw));
        prop_assert!(e1 > e2);
        prop_assert!(e1 > 0.0 && e1 < 1.0);
    }

    #[test]
    fn rate_does_not_move_center_or_constant(nu in -2.0f64..2.0, s2 in 0.05f64..3.0, t2 in 0.05f64..3.0, frac in 0.0f64..0.99) {
        let mc = moments_gaussian(nu, s2, t2).unwrap();
        let tight = build_drift_tightest(&mc).unwrap();
        let rate = tight.contraction + frac * (1.0 - tight.contraction);
        let loose = build_drift(&mc, rate).unwrap();
        prop_assert_eq!(tight.center, loose.center);
        prop_assert_eq!(tight.constant, loose.constant);
    }

    #[test]
    fn envelope_dominates_curve(r in 0.05f64..0.95, w_extra in 0.1f64..10.0, v0 in 0.0f64..5.0) {
        let law = Ar1Law::from_model(&ModelSpec::worked_gaussian()).unwrap();
        let w = 1.0 + w_extra;
        let curve = rosenthal_curve(RosenthalInputs {
            r, rate: 0.25, constant: 0.375, small_set: w,
            epsilon: minorization_mass(&law, w), start_v: v0,
        }).unwrap();
        let curve = BoundCurve::Rosenthal(curve);
        if let Ok(cert) = certificate_from_curve(&curve) {
            for l in 0..=200u64 {
                prop_assert!(cert.envelope(l) >= curve.value(l));
            }
        }
    }

    #[test]
    fn n_star_is_first_crossing(r in 0.05f64..0.6, w_extra in 0.2f64..6.0, omega in 1e-4f64..0.9) {
        let law = Ar1Law::from_model(&ModelSpec::worked_gaussian()).unwrap();
        let w = 1.0 + w_extra;
        let curve = BoundCurve::Rosenthal(rosenthal_curve(RosenthalInputs {
            r, rate: 0.25, constant: 0.375, small_set: w,
            epsilon: minorization_mass(&law, w), start_v: 0.0,
        }).unwrap());
        if let Ok(n) = solve_n_star(&curve, omega) {
            prop_assert!(curve.value(n) <= omega);
            if n >= 2 {
                prop_assert!(curve.value(n - 1) > omega);
            }
        }
    }

    #[test]
    fn dksc_decreases_in_l(x in -4.0f64..4.0) {
        let curve = dksc_curve(x, &ModelSpec::worked_gaussian()).unwrap();
        for l in 1..60u64 {
            prop_assert!(curve.value(l + 1) <= curve.value(l));
        }
    }
}
