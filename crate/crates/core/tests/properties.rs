use proptest::prelude::*;
use sirwave_core::linear_analysis::{a_lambda, a_lambda_eigenvalues, check_d3_condition};
use sirwave_core::{
    apply_delta_inverse, c_star, characteristic_f, incidence, lambda0, reaction_terms, Grid, GridFunction,
    ModelParams, ResolventSpec, Tail, INCIDENCE_GUARD,
};

fn params() -> impl Strategy<Value = ModelParams> {
    (
        0.1..3.0f64,
        0.1..3.0f64,
        0.1..3.0f64,
        0.1..5.0f64,
        0.0..2.0f64,
        0.0..2.0f64,
        0.2..3.0f64,
    )
        .prop_map(|(d1, d2, d3, beta, gamma, delta, s)| ModelParams {
            d1,
            d2,
            d3,
            beta,
            gamma,
            delta,
            s_minus_inf: s,
        })
}

/// Parameters with R0 > 1 and d3 < 2 d2.
fn wave_params() -> impl Strategy<Value = ModelParams> {
    params().prop_filter("wave regime", |p| p.beta > 1.05 * (p.gamma + p.delta) && p.d3 < 2.0 * p.d2)
}

fn state() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.0..5.0f64, 0.0..5.0f64, 0.0..5.0f64)
}

proptest! {
    #[test]
    fn reactions_sum_to_deaths(p in params(), (s, i, r) in state()) {
        let (a, b, c) = reaction_terms(s, i, r, &p);
        let scale = 1.0 + p.beta * i + (p.gamma + p.delta) * i;
        prop_assert!((a + b + c + p.delta * i).abs() <= 1e-12 * scale);
    }

    #[test]
    fn incidence_nondecreasing_in_s(beta in 0.1..5.0f64, (s, i, r) in state(), ds in 0.0..3.0f64) {
        let lo = incidence(s, i, r, beta, INCIDENCE_GUARD);
        let hi = incidence(s + ds, i, r, beta, INCIDENCE_GUARD);
        prop_assert!(hi >= lo - 1e-14 * (1.0 + lo));
    }

    #[test]
    fn incidence_bounded_by_each_compartment(beta in 0.1..5.0f64, (s, i, r) in state()) {
        let v = incidence(s, i, r, beta, INCIDENCE_GUARD);
        prop_assert!(v >= 0.0);
        prop_assert!(v <= beta * i * (1.0 + 1e-14));
        prop_assert!(v <= beta * s * (1.0 + 1e-14));
    }

    #[test]
    fn incidence_lipschitz(
        beta in 0.1..5.0f64,
        (s, i, r) in state(),
        (t, j, q) in state(),
    ) {
        prop_assume!(s + i + r > 1e-6 && t + j + q > 1e-6);
        let a = incidence(s, i, r, beta, INCIDENCE_GUARD);
        let b = incidence(t, j, q, beta, INCIDENCE_GUARD);
        let bound = beta * ((s - t).abs() + (i - j).abs() + (r - q).abs());
        prop_assert!((a - b).abs() <= bound * (1.0 + 1e-12) + 1e-14);
    }

    #[test]
    fn disease_free_state_is_a_fixed_point(p in params(), r in 0.0..3.0f64) {
        let (a, b, c) = reaction_terms(p.s_minus_inf, 0.0, r, &p);
        prop_assert_eq!((a, b, c), (0.0, 0.0, 0.0));
    }

    #[test]
    fn characteristic_function_is_concave(
        p in params(),
        c in 0.0..8.0f64,
        l1 in -5.0..5.0f64,
        l2 in -5.0..5.0f64,
        t in 0.0..1.0f64,
    ) {
        let mid = characteristic_f(t * l1 + (1.0 - t) * l2, c, &p);
        let chord = t * characteristic_f(l1, c, &p) + (1.0 - t) * characteristic_f(l2, c, &p);
        prop_assert!(mid >= chord - 1e-10 * (1.0 + chord.abs()));
    }

    #[test]
    fn characteristic_positive_exactly_between_roots(
        p in wave_params(),
        excess in 0.01..3.0f64,
        u in -0.5..1.5f64,
    ) {
        let c = c_star(&p).unwrap() + excess;
        let roots = lambda0(c, &p).unwrap();
        let (lo, hi) = (roots.lambda0, roots.lambda0_plus);
        prop_assert!(lo > 0.0 && lo < hi);
        prop_assert!(characteristic_f(lo, c, &p).abs() < 1e-9 * (1.0 + c * c));
        prop_assert!(characteristic_f(hi, c, &p).abs() < 1e-9 * (1.0 + c * c));
        let l = lo + u * (hi - lo);
        // keep away from the roots, where the sign is decided by rounding
        prop_assume!((l - lo).abs() > 1e-6 * hi && (l - hi).abs() > 1e-6 * hi);
        let inside = l > lo && l < hi;
        prop_assert_eq!(characteristic_f(l, c, &p) > 0.0, inside);
    }

    #[test]
    fn closed_form_eigenvalues_match_numerical(p in params(), l in 0.01..4.0f64) {
        let m = a_lambda(l, &p);
        let mut numeric: Vec<f64> = m.complex_eigenvalues().iter().map(|z| z.re).collect();
        let mut closed = a_lambda_eigenvalues(l, &p).to_vec();
        numeric.sort_by(f64::total_cmp);
        closed.sort_by(f64::total_cmp);
        let scale = 1.0 + closed.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in numeric.iter().zip(&closed) {
            prop_assert!((a - b).abs() <= 1e-10 * scale, "{numeric:?} vs {closed:?}");
        }
    }

    #[test]
    fn fast_waves_have_positive_d3_gap(p in wave_params(), excess in 0.0..3.0f64) {
        let c = c_star(&p).unwrap() * (1.0 + 1e-9) + excess;
        let d3 = check_d3_condition(&p, c);
        prop_assert!(d3.holds);
        prop_assert!(d3.c_minus_d3_lambda0.unwrap() > 0.0);
    }
}

fn spec_strategy() -> impl Strategy<Value = ResolventSpec> {
    (0.2..2.0f64, 0.0..4.0f64, 0.5..5.0f64).prop_map(|(d, c, alpha)| ResolventSpec::new(1, d, c, alpha).unwrap())
}

fn bumps(grid: Grid, coeffs: &[(f64, f64, f64)]) -> GridFunction {
    GridFunction::from_fn(grid, Tail::Zero, Tail::Zero, |x| {
        coeffs.iter().map(|&(a, x0, w)| a * (-(x - x0).powi(2) / (w * w)).exp()).sum()
    })
}

fn bump_coeffs() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0..2.0f64, -4.0..4.0f64, 0.5..2.0f64), 1..4)
}

fn grid() -> Grid {
    Grid::symmetric(12.0, 0.04).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn resolvent_preserves_nonnegativity(spec in spec_strategy(), coeffs in bump_coeffs()) {
        let h = bumps(grid(), &coeffs);
        let out = apply_delta_inverse(&h, &spec).unwrap();
        prop_assert!(out.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn resolvent_is_linear(
        spec in spec_strategy(),
        a in bump_coeffs(),
        b in bump_coeffs(),
        s in -3.0..3.0f64,
    ) {
        let g = grid();
        let (ha, hb) = (bumps(g, &a), bumps(g, &b));
        let mut combo = ha.clone();
        for (v, w) in combo.values.iter_mut().zip(&hb.values) {
            *v += s * w;
        }
        let lhs = apply_delta_inverse(&combo, &spec).unwrap();
        let (ia, ib) = (apply_delta_inverse(&ha, &spec).unwrap(), apply_delta_inverse(&hb, &spec).unwrap());
        let scale = 1.0 + ia.max_abs() + s.abs() * ib.max_abs();
        for k in 0..g.n {
            prop_assert!((lhs.values[k] - ia.values[k] - s * ib.values[k]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn resolvent_is_monotone(spec in spec_strategy(), a in bump_coeffs(), extra in bump_coeffs()) {
        let g = grid();
        let lo = bumps(g, &a);
        let mut hi = lo.clone();
        for (v, w) in hi.values.iter_mut().zip(&bumps(g, &extra).values) {
            *v += w;
        }
        let (ol, oh) = (apply_delta_inverse(&lo, &spec).unwrap(), apply_delta_inverse(&hi, &spec).unwrap());
        for k in 0..g.n {
            prop_assert!(oh.values[k] >= ol.values[k] - 1e-14);
        }
    }

    #[test]
    fn resolvent_eigenrelation(spec in spec_strategy(), u in 0.1..0.9f64) {
        // exp(l x) is an eigenfunction with eigenvalue 1 / f(l) for l between the roots
        let l = spec.lambda_minus + u * (spec.lambda_plus - spec.lambda_minus);
        prop_assume!(l.abs() < 2.0);
        let g = Grid::symmetric(6.0, 0.01).unwrap();
        let h = GridFunction::from_fn(g, Tail::ExpGrowth(l), Tail::ExpGrowth(l), |x| (l * x).exp());
        let out = apply_delta_inverse(&h, &spec).unwrap();
        let f = spec.symbol(l);
        prop_assert!(f > 0.0);
        for k in 0..g.n {
            let exact = (l * g.x(k)).exp() / f;
            prop_assert!((out.values[k] - exact).abs() <= 1e-4 * exact, "x = {}: {} vs {}", g.x(k), out.values[k], exact);
        }
    }
}
