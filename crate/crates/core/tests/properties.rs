use proptest::prelude::*;
use skl_core::clifford::Multivector;
use skl_core::domain::RadialDomain;
use skl_core::grid::GridFunction;
use skl_core::kernel::KernelSpec;
use skl_core::norm;
use skl_core::quadrature::{self, CpvOptions};
use skl_core::rational::Rational;
use skl_core::threshold::{self, conjugate_range, critical_exponent, End, QStar};
use skl_core::WeightedMeasure;

fn multivector(n: usize) -> impl Strategy<Value = Multivector> {
    prop::collection::vec(-1.0f64..1.0, 1 << n).prop_map(move |c| Multivector::from_coeffs(n, c).unwrap())
}

fn triple() -> impl Strategy<Value = (Multivector, Multivector, Multivector)> {
    (1usize..=5).prop_flat_map(|n| (multivector(n), multivector(n), multivector(n)))
}

fn pair() -> impl Strategy<Value = (Multivector, Multivector)> {
    (1usize..=5).prop_flat_map(|n| (multivector(n), multivector(n)))
}

/// Every kernel family with a valid parameter set, `n <= 5`.
fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        (1u32..60).prop_map(|k| KernelSpec::power_model(k as f64 / 20.0).unwrap()),
        (2usize..=5).prop_map(|n| KernelSpec::cauchy(n).unwrap()),
        (1usize..=5).prop_map(|n| KernelSpec::laplace_iterate(n).unwrap()),
        (2usize..=5)
            .prop_flat_map(|n| (Just(n), 1..n, 0.1f64..5.0))
            .prop_map(|(n, l, t)| KernelSpec::dirac_iterate(n, l).unwrap().with_theta(t).unwrap()),
    ]
}

fn point_for(spec: &KernelSpec) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, spec.n()).prop_filter("away from origin", |x| {
        x.iter().map(|v| v * v).sum::<f64>() > 1e-4
    })
}

fn small_rational() -> impl Strategy<Value = Rational> {
    (0i64..40, 1i64..12).prop_map(|(a, b)| Rational::new(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn product_is_associative((a, b, c) in triple()) {
        let left = (&(&a * &b)) * &c;
        let right = &a * &(&b * &c);
        let scale = 1.0 + a.norm() * b.norm() * c.norm();
        prop_assert!((&left - &right).norm() <= 1e-12 * scale);
    }

    #[test]
    fn conjugation_is_an_involution(a in (1usize..=5).prop_flat_map(multivector)) {
        prop_assert_eq!(a.conjugate().conjugate(), a);
    }

    #[test]
    fn conjugation_reverses_products((a, b) in pair()) {
        let lhs = (&a * &b).conjugate();
        let rhs = &b.conjugate() * &a.conjugate();
        prop_assert!((&lhs - &rhs).norm() <= 1e-12 * (1.0 + a.norm() * b.norm()));
    }

    #[test]
    fn vector_times_conjugate_is_squared_length(x in prop::collection::vec(-5.0f64..5.0, 1..=5)) {
        let v = Multivector::vector_from_point(&x).unwrap();
        let prod = &v * &v.conjugate();
        let len2: f64 = x.iter().map(|c| c * c).sum();
        prop_assert!((prod.scalar_part() - len2).abs() <= 1e-12 * (1.0 + len2));
        prop_assert!((&prod - &Multivector::scalar(x.len(), len2).unwrap()).norm() <= 1e-12 * (1.0 + len2));
    }

    #[test]
    fn vectors_scale_norms_exactly((x, f) in (1usize..=5).prop_flat_map(|n| (prop::collection::vec(-2.0f64..2.0, n), multivector(n)))) {
        let v = Multivector::vector_from_point(&x).unwrap();
        let lhs = (&v * &f).norm();
        prop_assert!((lhs - v.norm() * f.norm()).abs() <= 1e-12 * (1.0 + lhs));
    }

    #[test]
    fn power_integral_is_additive(a in -4.0f64..2.0, r0 in 0.01f64..2.0, s in 1.01f64..5.0, t in 1.01f64..5.0) {
        let r1 = r0 * s;
        let r2 = r1 * t;
        let whole = quadrature::power_integral(a, r0, r2).unwrap().value.unwrap();
        let parts = quadrature::power_integral(a, r0, r1).unwrap().value.unwrap()
            + quadrature::power_integral(a, r1, r2).unwrap().value.unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * whole.abs().max(1.0));
    }

    #[test]
    fn tail_doubling_flags_non_integrable_powers(a in -1.0f64..1.5, r0 in 0.1f64..10.0) {
        let verdict = quadrature::tail_doubling_test(|r: f64| r.powf(a), r0, 20);
        prop_assert!(verdict.decided && verdict.diverges);
    }

    #[test]
    fn conjugate_range_is_an_involution(num in 2i64..500, den in 1i64..200) {
        prop_assume!(num > den);
        let q = Rational::new(num, den);
        match conjugate_range(q) {
            QStar::Finite(p) => prop_assert_eq!(conjugate_range(p), QStar::Finite(q)),
            QStar::Infinite => prop_assert!(false, "q > 1 has a finite conjugate"),
        }
    }

    #[test]
    fn thresholds_move_monotonically(spec in kernel(), w in small_rational(), j in 0u32..4) {
        let base = critical_exponent(&spec, w, End::AtInfinity, j).unwrap();
        let deeper = critical_exponent(&spec, w, End::AtInfinity, j + 1).unwrap();
        let heavier = critical_exponent(&spec, w + Rational::new(1, 3), End::AtInfinity, j).unwrap();
        prop_assert!(deeper < base);
        prop_assert!(heavier > base);
    }

    #[test]
    fn theta_does_not_move_thresholds(n in 2usize..=8, l in 1usize..8, theta in 0.01f64..100.0, w in small_rational()) {
        prop_assume!(l < n);
        let plain = KernelSpec::dirac_iterate(n, l).unwrap();
        let scaled = plain.clone().with_theta(theta).unwrap();
        prop_assert_eq!(
            threshold::threshold_report(&plain, w, 0).unwrap(),
            threshold::threshold_report(&scaled, w, 0).unwrap()
        );
    }

    #[test]
    fn kernel_norm_finite_exactly_above_threshold(spec in kernel(), w in small_rational(), r_in in 0.1f64..4.0, off in 1i64..40) {
        let p_star = critical_exponent(&spec, w, End::AtInfinity, 0).unwrap();
        let measure = WeightedMeasure::new(skl_core::rational::to_f64(&w)).unwrap();
        let ext = RadialDomain::exterior(spec.n(), r_in).unwrap();
        let step = Rational::new(off, 40) * p_star;
        let p_hi = skl_core::rational::to_f64(&(p_star + step));
        let p_lo = skl_core::rational::to_f64(&(p_star - step / 2));
        prop_assert!(norm::kernel_lp_norm(&spec, p_hi, &measure, &ext).unwrap().is_finite());
        prop_assert!(!norm::kernel_lp_norm(&spec, p_lo, &measure, &ext).unwrap().is_finite());
    }

    #[test]
    fn grid_norm_scales_and_is_monotone(
        shape in prop::collection::vec(3usize..7, 1..=3),
        seed in any::<u64>(),
        c in -5.0f64..5.0,
        p in 1.0f64..4.0,
        k in 0usize..=2,
        w in 0.0f64..3.0,
    ) {
        use rand::{Rng, SeedableRng};
        let n = shape.len();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let nodes: usize = shape.iter().product();
        let coeffs: Vec<f64> = (0..nodes << n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = GridFunction::from_coeffs(n, vec![-1.0; n], vec![1.5; n], shape.clone(), coeffs).unwrap();
        let m = WeightedMeasure::new(w).unwrap();
        let base = norm::grid_norm(&f, p, k, &m).unwrap().value;
        let scaled = norm::grid_norm(&f.scale(c), p, k, &m).unwrap().value;
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-12 * (1.0 + scaled));
        if k == 0 {
            // |f| <= |g| pointwise with g = f scaled up blade-wise
            let g = f.scale(1.0 + c.abs());
            prop_assert!(base <= norm::grid_norm(&g, p, 0, &m).unwrap().value);
            let shrunk: Vec<f64> = f.coeffs().iter().enumerate().map(|(i, v)| if i % 3 == 0 { 0.0 } else { *v }).collect();
            let h = f.with_coeffs(shrunk).unwrap();
            prop_assert!(norm::grid_norm(&h, p, 0, &m).unwrap().value <= base);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn kernels_are_homogeneous((spec, x) in kernel().prop_flat_map(|s| { let pt = point_for(&s); (Just(s), pt) }), lambda in 0.05f64..20.0) {
        let residual = spec.homogeneity_check(&x, lambda).unwrap();
        let scale = spec.evaluate(&x).unwrap().norm() * lambda.powf(-spec.homogeneity_degree_f64());
        prop_assert!(residual <= 1e-12 * scale, "residual {} vs {}", residual, scale);
    }
}

#[test]
fn principal_value_family() {
    for k in 1..=9 {
        let alpha = k as f64 / 10.0;
        let spec = KernelSpec::power_model(alpha).unwrap();
        let m = WeightedMeasure::lebesgue();
        let res = quadrature::cpv_limit(
            |e| quadrature::punctured_integral(&spec, 1.0, &m, e, 1.0),
            &quadrature::geometric_schedule(0.1, 0.1, 5),
            &CpvOptions::default(),
        )
        .unwrap();
        let expected = 2.0 / (1.0 - alpha);
        assert!((res.report.value.unwrap() - expected).abs() < 1e-6, "alpha {alpha}");
    }
}

#[test]
fn constant_sequence_limit_is_exact() {
    let res = quadrature::cpv_limit(
        |_| Ok::<f64, ()>(7.0),
        &quadrature::geometric_schedule(0.1, 0.5, 6),
        &CpvOptions::default(),
    )
    .unwrap();
    assert_eq!(res.report.value, Some(7.0));
}
