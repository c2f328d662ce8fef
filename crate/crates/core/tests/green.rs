use dysonprop::green::*;
use dysonprop::model::{random_model, scale_coupling, CouplingScale, SpectralModel};
use dysonprop::propagator::TruncationSpec;
use dysonprop::quadrature::QuadratureSpec;
use dysonprop::{linalg, Error, Sign, C64};
use ndarray::Array2;
use proptest::prelude::*;

fn dyson_ready_model(seed: u64, energy: f64, rho_target: f64) -> SpectralModel {
    let m = random_model(4, seed, 1.0).unwrap();
    let q = ResolventQuery::new(energy, Sign::Retarded, 1e-3).unwrap();
    let rho = dyson_partial(&m, q, 0).rho;
    scale_coupling(&m, CouplingScale::new(rho_target / rho).unwrap())
}

#[test]
fn resolvent_identity_and_conjugation() {
    let m = random_model(4, 11, 0.7).unwrap();
    for energy in [-3.0, 0.2, 2.5] {
        let plus = ResolventQuery::new(energy, Sign::Retarded, 0.05).unwrap();
        let minus = ResolventQuery::new(energy, Sign::Advanced, 0.05).unwrap();
        let g = complete_resolvent_direct(&m, plus).unwrap().entries;
        let g0 = unperturbed_resolvent(&m, plus).entries;
        let rhs = &g0 + &g0.dot(m.h1()).dot(&g);
        assert!(linalg::max_abs_diff(&g, &rhs) < 1e-10 * linalg::max_abs(&g).max(1.0));
        let ga = complete_resolvent_direct(&m, minus).unwrap().entries;
        assert!(linalg::max_abs_diff(&ga, &linalg::adjoint(&g)) < 1e-12 * linalg::max_abs(&g).max(1.0));
    }
}

#[test]
fn unperturbed_resolvent_is_inverse_shift() {
    let m = random_model(3, 4, 0.0).unwrap();
    let q = ResolventQuery::new(0.3, Sign::Advanced, 0.2).unwrap();
    let g0 = unperturbed_resolvent(&m, q).entries;
    for (k, &e) in m.energies().iter().enumerate() {
        assert_eq!(g0[[k, k]], C64::new(1.0, 0.0) / C64::new(0.3 - e, -0.2));
    }
    assert_eq!(dyson_partial(&m, q, 7).resolvent.entries, g0);
    assert_eq!(complete_resolvent_direct(&m, q).unwrap().entries.dim(), (3, 3));
}

#[test]
fn rejects_bad_queries() {
    assert!(ResolventQuery::new(f64::NAN, Sign::Retarded, 0.1).is_err());
    assert!(ResolventQuery::new(0.0, Sign::Retarded, 0.0).is_err());
    assert!(ResolventQuery::new(0.0, Sign::Retarded, -1.0).is_err());
}

#[test]
fn dyson_series_converges_to_direct_resolvent() {
    for seed in 0..5 {
        let energy = 3.0;
        let m = dyson_ready_model(seed, energy, 0.5);
        let q = ResolventQuery::new(energy, Sign::Retarded, 1e-3).unwrap();
        let direct = complete_resolvent_direct(&m, q).unwrap();
        let partial = dyson_partial(&m, q, 40);
        assert!(partial.rho <= 0.5 + 1e-12);
        assert!(partial.resolvent.max_abs_diff(&direct) <= 1e-8);
    }
}

#[test]
fn dyson_tail_obeys_geometric_bound() {
    let energy = -2.5;
    let m = dyson_ready_model(9, energy, 0.45);
    let q = ResolventQuery::new(energy, Sign::Advanced, 1e-2).unwrap();
    let direct = complete_resolvent_direct(&m, q).unwrap();
    for n in 0..12 {
        let partial = dyson_partial(&m, q, n);
        let err = linalg::spectral_norm(&(&partial.resolvent.entries - &direct.entries));
        let bound = partial.tail_bound().unwrap();
        assert!(err <= bound * (1.0 + 1e-9), "N={n}: {err} > {bound}");
    }
}

#[test]
fn divergent_series_reports_rho() {
    let m = dyson_ready_model(2, 0.0, 3.0);
    let q = ResolventQuery::new(0.0, Sign::Retarded, 1e-3).unwrap();
    let p = dyson_partial(&m, q, 3);
    assert!(p.rho >= 1.0);
    assert!(p.tail_bound().is_none());
}

#[test]
fn timedep_green_step_convention() {
    let m = SpectralModel::two_level(1.0, 0.2).unwrap();
    let spec = TruncationSpec::new(2);
    let zero = Array2::<C64>::zeros((2, 2));
    assert_eq!(timedep_green(&m, spec, 0.0, 1.0, Sign::Retarded).unwrap().entries, zero);
    assert_eq!(timedep_green(&m, spec, 1.0, 0.0, Sign::Advanced).unwrap().entries, zero);
    let at_zero = timedep_green(&m, spec, 0.5, 0.5, Sign::Retarded).unwrap().entries;
    assert!(linalg::max_abs_diff(&at_zero, &linalg::identity(2).mapv(|z| z * C64::new(0.0, -0.5))) < 1e-15);
    let advanced = timedep_green(&m, spec, 0.0, 0.7, Sign::Advanced).unwrap().entries;
    let oracle = damped_green_oracle(&m, -0.7, Sign::Advanced, 0.0).unwrap().entries;
    assert!(linalg::max_abs_diff(&advanced, &oracle) < 1e-2);
}

#[test]
fn inverse_transform_of_free_green_is_free_resolvent() {
    let m = random_model(3, 5, 0.0).unwrap();
    let quad = QuadratureSpec::gauss(0.0, 200.0, 2000).unwrap();
    for sign in [Sign::Retarded, Sign::Advanced] {
        let q = ResolventQuery::new(0.4, sign, 0.1).unwrap();
        let ft = inverse_fourier_check(&m, TruncationSpec::new(0), 0.4, sign, 0.1, quad).unwrap();
        assert!(ft.max_abs_diff(&unperturbed_resolvent(&m, q)) <= 1e-6);
    }
}

#[test]
fn inverse_transform_matches_dyson_order_by_order() {
    let m = SpectralModel::two_level(1.0, 0.3).unwrap();
    let quad = QuadratureSpec::gauss(0.0, 200.0, 2000).unwrap();
    for sign in [Sign::Retarded, Sign::Advanced] {
        for n in 0..=2 {
            for energy in [-0.5, 0.5, 1.7] {
                let q = ResolventQuery::new(energy, sign, 0.1).unwrap();
                let ft = inverse_fourier_check(&m, TruncationSpec::new(n), energy, sign, 0.1, quad).unwrap();
                let dyson = dyson_partial(&m, q, n).resolvent;
                assert!(ft.max_abs_diff(&dyson) <= 1e-5, "N={n} E={energy}");
            }
        }
    }
}

#[test]
fn inverse_transform_checks_domain() {
    let m = SpectralModel::two_level(1.0, 0.3).unwrap();
    let spec = TruncationSpec::new(1);
    let short = QuadratureSpec::gauss(0.0, 20.0, 200).unwrap();
    assert!(matches!(inverse_fourier_check(&m, spec, 0.0, Sign::Retarded, 0.1, short), Err(Error::QuadratureDomain(_))));
    let shifted = QuadratureSpec::gauss(-1.0, 200.0, 200).unwrap();
    assert!(matches!(inverse_fourier_check(&m, spec, 0.0, Sign::Retarded, 0.1, shifted), Err(Error::QuadratureDomain(_))));
}

#[test]
fn forward_transform_of_single_level() {
    let m = SpectralModel::new(vec![0.0], Array2::zeros((1, 1)), "single").unwrap();
    let quad = QuadratureSpec::gauss(-10.0, 10.0, 8000).unwrap();
    let g = forward_fourier(&m, quad, 1.0, 0.0, Sign::Retarded, 0.1, None).unwrap();
    let expected = C64::new(0.0, -(-0.1f64).exp());
    assert!((g.entries[[0, 0]] - expected).norm() <= 1e-3);
    let before = forward_fourier(&m, quad, 0.0, 1.0, Sign::Retarded, 0.1, None).unwrap();
    assert!(before.entries[[0, 0]].norm() <= 1e-3);
}

#[test]
fn forward_transform_is_causal_and_matches_oracle() {
    let m = SpectralModel::two_level(1.0, 0.3).unwrap();
    let quad = QuadratureSpec::gauss(-10.0, 11.0, 8000).unwrap();
    for sign in [Sign::Retarded, Sign::Advanced] {
        for tau in [-1.5, -0.5, 0.5, 1.5] {
            let g = forward_fourier(&m, quad, tau, 0.0, sign, 0.1, None).unwrap();
            let oracle = damped_green_oracle(&m, tau, sign, 0.1).unwrap();
            assert!(g.max_abs_diff(&oracle) <= 1e-3, "{sign:?} tau={tau}");
            if sign.factor() * tau < 0.0 {
                assert!(linalg::max_abs(&g.entries) <= 1e-3);
            }
        }
    }
}

#[test]
fn forward_transform_of_dyson_partial_is_truncated_green() {
    let m = SpectralModel::two_level(1.0, 0.2).unwrap();
    let quad = QuadratureSpec::gauss(-10.0, 11.0, 8000).unwrap();
    for n in 0..=2 {
        let g = forward_fourier(&m, quad, 1.0, 0.0, Sign::Retarded, 0.1, Some(n)).unwrap();
        let truncated = timedep_green(&m, TruncationSpec::new(n), 1.0, 0.0, Sign::Retarded).unwrap();
        let damped = truncated.entries.mapv(|z| z * (-0.1f64).exp());
        assert!(linalg::max_abs_diff(&g.entries, &damped) <= 1e-3, "N={n}");
    }
}

#[test]
fn forward_transform_needs_margin() {
    let m = SpectralModel::two_level(1.0, 0.3).unwrap();
    let narrow = QuadratureSpec::gauss(-2.0, 3.0, 200).unwrap();
    assert!(matches!(
        forward_fourier(&m, narrow, 1.0, 0.0, Sign::Retarded, 0.1, None),
        Err(Error::QuadratureDomain(_))
    ));
    let quad = QuadratureSpec::gauss(-10.0, 10.0, 200).unwrap();
    assert!(forward_fourier(&m, quad, 1.0, 1.0, Sign::Retarded, 0.1, None).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn dyson_partial_sums_approach_direct(seed in 0u64..1000, energy in 2.5f64..6.0, rho in 0.05f64..0.6) {
        let m = dyson_ready_model(seed, energy, rho);
        let q = ResolventQuery::new(energy, Sign::Retarded, 1e-3).unwrap();
        let direct = complete_resolvent_direct(&m, q).unwrap();
        let mut previous = f64::INFINITY;
        for n in [2, 6, 12, 24] {
            let p = dyson_partial(&m, q, n);
            let err = linalg::spectral_norm(&(&p.resolvent.entries - &direct.entries));
            prop_assert!(err <= p.tail_bound().unwrap() * (1.0 + 1e-9) + 1e-14);
            prop_assert!(err <= previous + 1e-14);
            previous = err;
        }
    }
}
