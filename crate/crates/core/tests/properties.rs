use frachardy_core::analysis::fit_power_law;
use frachardy_core::specfun::{beta_of_c, coupling_f, critical_beta, digamma_fn, gamma_fn, hardy_best_constant};
use frachardy_core::DomainSpec;
use proptest::prelude::*;

fn dims() -> impl Strategy<Value = (usize, f64)> {
    prop_oneof![
        (0.05f64..0.95).prop_map(|a| (1usize, a)),
        (0.05f64..1.95).prop_map(|a| (2usize, a)),
        (0.05f64..1.95).prop_map(|a| (3usize, a)),
    ]
}

proptest! {
    #[test]
    fn coupling_is_symmetric((d, a) in dims(), u in 0.01f64..0.99) {
        let top = d as f64 - a;
        let b = u * top;
        let f1 = coupling_f(d, a, b).unwrap();
        let f2 = coupling_f(d, a, top - b).unwrap();
        prop_assert!((f1 - f2).abs() <= 1e-12 * f1.abs().max(1.0));
    }

    #[test]
    fn coupling_increases_below_critical((d, a) in dims(), u in 0.01f64..0.98) {
        let bc = critical_beta(d, a).unwrap();
        let b = u * bc;
        let step = 0.01 * bc;
        prop_assert!(coupling_f(d, a, b + step).unwrap() > coupling_f(d, a, b).unwrap());
        prop_assert!(coupling_f(d, a, b).unwrap() < hardy_best_constant(d, a).unwrap());
    }

    #[test]
    fn beta_of_c_inverts_coupling((d, a) in dims(), u in 0.02f64..0.98) {
        let b = u * critical_beta(d, a).unwrap();
        let c = coupling_f(d, a, b).unwrap();
        let back = beta_of_c(d, a, c).unwrap();
        prop_assert!((back - b).abs() <= 1e-9);
    }

    #[test]
    fn digamma_recurrence(x in 0.05f64..40.0) {
        let lhs = digamma_fn(x + 1.0).unwrap();
        let rhs = digamma_fn(x).unwrap() + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn gamma_recurrence(x in 0.05f64..30.0) {
        let lhs = gamma_fn(x + 1.0).unwrap();
        let rhs = x * gamma_fn(x).unwrap();
        prop_assert!((lhs / rhs - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn fit_ignores_rescaling(
        exponent in -1.0f64..1.0,
        scale in 1e-3f64..1e3,
        noise in proptest::collection::vec(-0.05f64..0.05, 12),
    ) {
        let x: Vec<f64> = (1..=12).map(|k| 0.01 * k as f64).collect();
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| v.powf(exponent) * (1.0 + e)).collect();
        let ys: Vec<f64> = y.iter().map(|v| v * scale).collect();
        let a = fit_power_law(&x, &y, (0.0, 1.0)).unwrap();
        let b = fit_power_law(&x, &ys, (0.0, 1.0)).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() <= 1e-10);
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() <= 1e-9);
    }

    #[test]
    fn domain_text_round_trip(a in -5.0f64..-0.01, b in 0.01f64..5.0, r in 0.01f64..5.0) {
        for spec in [DomainSpec::interval(a, b).unwrap(), DomainSpec::rectangle(a, b, a, b).unwrap(), DomainSpec::disk(r).unwrap()] {
            let back: DomainSpec = spec.to_string().parse().unwrap();
            prop_assert_eq!(back, spec);
        }
    }
}
