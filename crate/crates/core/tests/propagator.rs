use dysonprop::model::{random_model, scale_coupling, CouplingScale, SpectralModel};
use dysonprop::oracle::{dyson_term_quadrature, exact_evolution};
use dysonprop::propagator::*;
use dysonprop::{linalg, Sign, C64};
use ndarray::Array2;
use proptest::prelude::*;

/// Degenerate model: levels 0 and 2 coincide, so paths revisit equal energies.
fn degenerate_model(v: f64) -> SpectralModel {
    let mut h1 = Array2::zeros((3, 3));
    for (i, j, x) in [(0, 1, v), (1, 2, 0.5 * v), (0, 2, 0.7 * v)] {
        h1[[i, j]] = C64::new(x, 0.3 * x);
        h1[[j, i]] = C64::new(x, -0.3 * x);
    }
    h1[[1, 1]] = C64::new(0.4 * v, 0.0);
    SpectralModel::new(vec![0.5, 1.5, 0.5], h1, "degenerate").unwrap()
}

#[test]
fn terms_match_nested_quadrature_on_random_models() {
    for dim in 1..=4 {
        for seed in 0..3 {
            let m = random_model(dim, 100 * dim as u64 + seed, 0.8).unwrap();
            for t in [0.3, 1.0, 2.0] {
                for l in 0..=2 {
                    let a = a_matrix(&m, l, t).unwrap();
                    let q = dyson_term_quadrature(&m, l, t, 64).unwrap();
                    assert!(a.max_abs_diff(&q) <= 1e-6, "D={dim} l={l} t={t}");
                }
            }
        }
    }
}

#[test]
fn degenerate_levels_produce_secular_terms_that_match_quadrature() {
    let m = degenerate_model(0.6);
    assert!(!m.nondegenerate());
    for l in 1..=3 {
        let a = a_matrix(&m, l, 1.7).unwrap();
        let q = dyson_term_quadrature(&m, l, 1.7, 64).unwrap();
        assert!(a.max_abs_diff(&q) <= 1e-9, "l={l}");
    }
}

#[test]
fn truncation_converges_to_exact_evolution() {
    let m = random_model(4, 3, 0.3).unwrap();
    let exact = exact_evolution(&m, 1.5).unwrap();
    let mut previous = f64::INFINITY;
    for n in 0..=9 {
        let err = truncated_evolution(&m, TruncationSpec::new(n), 1.5).unwrap().max_abs_diff(&exact);
        assert!(err < previous);
        previous = err;
    }
    assert!(previous < 1e-8);
}

#[test]
fn truncation_error_and_unitarity_defect_scale_with_coupling() {
    for n in 1..=3 {
        let mut err = Vec::new();
        let mut defect = Vec::new();
        for lam in [0.1, 0.05] {
            let m = scale_coupling(&SpectralModel::two_level(1.0, 1.0).unwrap(), CouplingScale::new(lam).unwrap());
            let u = truncated_evolution(&m, TruncationSpec::new(n), 1.0).unwrap();
            err.push(u.max_abs_diff(&exact_evolution(&m, 1.0).unwrap()));
            defect.push(u.unitarity_defect());
        }
        let expected = 2f64.powi(n as i32 + 1);
        let ratio = err[0] / err[1];
        assert!((ratio / expected - 1.0).abs() < 0.25, "N={n} error ratio {ratio}");
        // With a purely off-diagonal H1 the order-3 part of U_2^dagger U_2 is the
        // anticommutator of an off-diagonal and a diagonal traceless 2x2 matrix,
        // which vanishes; the N = 2 defect is therefore fourth order.
        let defect_order = if n == 2 { 4 } else { n as i32 + 1 };
        let ratio = defect[0] / defect[1];
        assert!((ratio / 2f64.powi(defect_order) - 1.0).abs() < 0.25, "N={n} defect ratio {ratio}");
    }
}

#[test]
fn unitarity_defect_is_third_order_for_generic_second_order_truncation() {
    let base = random_model(3, 5, 1.0).unwrap();
    let defect: Vec<f64> = [0.02, 0.01]
        .iter()
        .map(|&lam| {
            let m = scale_coupling(&base, CouplingScale::new(lam).unwrap());
            truncated_evolution(&m, TruncationSpec::new(2), 1.0).unwrap().unitarity_defect()
        })
        .collect();
    let ratio = defect[0] / defect[1];
    assert!((ratio / 8.0 - 1.0).abs() < 0.25, "ratio {ratio}");
}

#[test]
fn epsilon_form_extrapolates_to_truncated_evolution() {
    let eps = [1e-2, 5e-3, 2.5e-3];
    for dim in 1..=3 {
        for n in 0..=2 {
            let m = random_model(dim, 7 + dim as u64, 0.5).unwrap();
            let direct = truncated_evolution(&m, TruncationSpec::new(n), 1.0).unwrap();
            for sign in [Sign::Retarded, Sign::Advanced] {
                let ext = epsilon_form_extrapolated(&m, TruncationSpec::new(n), 1.0, &eps, sign).unwrap();
                assert!(ext.max_abs_diff(&direct) <= 1e-6, "D={dim} N={n} {sign:?}");
            }
        }
    }
}

#[test]
fn epsilon_form_handles_coincident_levels() {
    let m = degenerate_model(0.4);
    let spec = TruncationSpec::new(2);
    let direct = truncated_evolution(&m, spec, 1.0).unwrap();
    let ext = epsilon_form_extrapolated(&m, spec, 1.0, &halving_ladder(1e-2), Sign::Retarded).unwrap();
    assert!(ext.max_abs_diff(&direct) <= 1e-6);
}

#[test]
fn epsilon_form_rejects_nonpositive_eps() {
    let m = random_model(2, 1, 0.5).unwrap();
    assert!(epsilon_form_term(&m, 1, 1.0, 0.0, Sign::Retarded).is_err());
    assert!(epsilon_form_term(&m, 1, 1.0, -1e-3, Sign::Retarded).is_err());
}

#[test]
fn tuple_budget_guards_large_enumerations() {
    let m = random_model(4, 2, 0.5).unwrap();
    assert!(a_matrix_with_budget(&m, 3, 1.0, TupleBudget(4u64.pow(4))).is_ok());
    assert!(matches!(
        a_matrix_with_budget(&m, 3, 1.0, TupleBudget(4u64.pow(4) - 1)),
        Err(dysonprop::Error::BudgetExceeded { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficient_matrix_is_consistent_with_single_entries(
        seed in 0u64..10_000, dim in 1usize..4, l in 0usize..4, t in -2.0f64..2.0,
    ) {
        let m = random_model(dim, seed, 0.7).unwrap();
        let a = a_matrix(&m, l, t).unwrap();
        for g in 0..dim {
            for gp in 0..dim {
                let single = a_coefficient(&m, l, g, gp, t).unwrap();
                prop_assert!((single - a.entries[[g, gp]]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn coupling_scales_each_order_homogeneously(
        seed in 0u64..10_000, lam in 0.1f64..3.0, l in 0usize..4,
    ) {
        let m = random_model(3, seed, 1.0).unwrap();
        let scaled = scale_coupling(&m, CouplingScale::new(lam).unwrap());
        let a = a_matrix(&m, l, 0.9).unwrap().entries;
        let b = a_matrix(&scaled, l, 0.9).unwrap().entries;
        let expected = a.mapv(|z| z * lam.powi(l as i32));
        prop_assert!(linalg::max_abs_diff(&b, &expected) <= 1e-12 * linalg::max_abs(&expected).max(1.0));
    }

    #[test]
    fn truncated_evolution_at_large_order_is_unitary(seed in 0u64..10_000, t in -1.5f64..1.5) {
        let m = random_model(3, seed, 0.2).unwrap();
        let u = truncated_evolution(&m, TruncationSpec::new(9), t).unwrap();
        prop_assert!(u.unitarity_defect() <= 1e-9);
        prop_assert!(u.max_abs_diff(&exact_evolution(&m, t).unwrap()) <= 1e-9);
    }
}
