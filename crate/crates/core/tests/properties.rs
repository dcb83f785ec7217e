mod common;

use common::*;
use mmbm_core::model::{validate_resample, ResampleSpec};
use mmbm_core::numkernel::*;
use mmbm_core::regenerative::{phi_limit, regen_cdf, rho_limit};
use mmbm_core::stationary::*;
use mmbm_core::{BoundaryVariant, Level, Matrix, MmbmModel, RowVector, StickySpec, Vector};
use proptest::prelude::*;

fn arb_stable(m: usize) -> impl Strategy<Value = Matrix> {
    // Diagonally dominant with a negative diagonal, hence stable.
    proptest::collection::vec(-1.0f64..1.0, m * m).prop_map(move |x| {
        let mut a = Matrix::from_row_slice(m, m, &x);
        for i in 0..m {
            let off: f64 = (0..m).filter(|j| *j != i).map(|j| a[(i, j)].abs()).sum();
            a[(i, i)] = -off - 0.1 - a[(i, i)].abs();
        }
        a
    })
}

fn arb_generator(m: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(0.01f64..5.0, m * m).prop_map(move |x| {
        let mut g = Matrix::from_row_slice(m, m, &x);
        for i in 0..m {
            g[(i, i)] = 0.0;
            let s: f64 = g.row(i).sum();
            g[(i, i)] = -s;
        }
        g
    })
}

fn arb_resample(m: usize) -> impl Strategy<Value = ResampleSpec> {
    (proptest::collection::vec(0.0f64..2.0, m * m), proptest::collection::vec(0.05f64..2.0, m * m)).prop_map(
        move |(a, at)| {
            let a = Matrix::from_row_slice(m, m, &a);
            let mut at = Matrix::from_row_slice(m, m, &at);
            for i in 0..m {
                at[(i, i)] = 0.0;
                let s = a.row(i).sum() + at.row(i).sum();
                at[(i, i)] = -s;
            }
            validate_resample(a, at, Some(Matrix::zeros(m, m)), m).unwrap()
        },
    )
}

fn arb_variant(m: usize) -> impl Strategy<Value = BoundaryVariant> {
    prop_oneof![
        Just(BoundaryVariant::Standard),
        proptest::collection::vec(0.1f64..5.0, m)
            .prop_map(move |a| BoundaryVariant::Sticky(StickySpec::new(Vector::from_vec(a), m).unwrap())),
        arb_resample(m).prop_map(BoundaryVariant::Resampled),
    ]
}

fn arb_model_and_variant() -> impl Strategy<Value = (MmbmModel, BoundaryVariant)> {
    arb_model(1..=4).prop_flat_map(|model| {
        let m = model.phases();
        (Just(model), arb_variant(m))
    })
}

fn law_of(model: &MmbmModel, variant: &BoundaryVariant) -> PhaseCdf {
    match variant {
        BoundaryVariant::Standard => stationary_standard(model).unwrap().law,
        BoundaryVariant::Sticky(s) => stationary_sticky(model, s).unwrap(),
        BoundaryVariant::Resampled(s) => stationary_resampled(model, s).unwrap(),
    }
}

fn max_abs(m: &Matrix) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_semigroup(a in (1usize..=6).prop_flat_map(arb_stable), s in 0.0f64..5.0, t in 0.0f64..5.0) {
        let lhs = matrix_exponential(&a, s + t).unwrap();
        let rhs = matrix_exponential(&a, s).unwrap() * matrix_exponential(&a, t).unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) <= 1e-10);
    }

    #[test]
    fn generator_stationary_vector(g in (1usize..=8).prop_flat_map(arb_generator)) {
        let v = stationary_row_vector(&g, MatrixKind::Generator).unwrap();
        prop_assert!((&v * &g).amax() <= 1e-12 * inf_norm(&g).max(1.0));
        prop_assert!((v.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(v.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn stochastic_stationary_vector(g in (1usize..=8).prop_flat_map(arb_generator)) {
        // uniformisation of a generator gives an irreducible stochastic matrix
        let m = g.nrows();
        let rate = (0..m).map(|i| -g[(i, i)]).fold(0.0, f64::max) + 1.0;
        let p = Matrix::identity(m, m) + &g / rate;
        let v = stationary_row_vector(&p, MatrixKind::Stochastic).unwrap();
        prop_assert!((&v * &p - &v).amax() <= 1e-12);
        prop_assert!(v.iter().all(|x| *x > 0.0));
    }

    #[test]
    fn quadratic_at_zero_is_a_generator(model in arb_model(1..=8)) {
        let sol = solve_stable_quadratic(model.generator(), model.mu(), model.sigma(), 0.0).unwrap();
        prop_assert!(sol.residual_norm <= 1e-10);
        let m = model.phases();
        for i in 0..m {
            prop_assert!(sol.u.row(i).sum().abs() <= 1e-10);
            for j in 0..m {
                if i != j {
                    prop_assert!(sol.u[(i, j)] >= -1e-12);
                }
            }
        }
    }

    #[test]
    fn quadratic_with_killing_is_stable(model in arb_model(1..=8), q in 0.01f64..10.0) {
        let sol = solve_stable_quadratic(model.generator(), model.mu(), model.sigma(), q).unwrap();
        prop_assert!(sol.residual_norm <= 1e-10);
        prop_assert!(spectral_abscissa(&sol.u).unwrap() < 0.0);
        let again = quadratic_residual(model.generator(), model.mu(), model.sigma(), q, &sol.u);
        prop_assert!(again <= 1e-10);
    }

    #[test]
    fn longer_timers_catch_more_returns(model in arb_model(1..=4), q1 in 0.0f64..3.0, dq in 0.01f64..3.0) {
        let lambda = 4.0 * model.lambda_threshold() + 100.0;
        let a = solve_riccati_psi(&model, lambda, q1).unwrap();
        let b = solve_riccati_psi(&model, lambda, q1 + dq).unwrap();
        let m = model.phases();
        for i in 0..m {
            for j in 0..m {
                prop_assert!(a.psi_q[(i, j)] >= b.psi_q[(i, j)] - 1e-12);
                prop_assert!(b.psi_q[(i, j)] >= -1e-14 && b.psi_q[(i, j)] <= b.psi[(i, j)] + 1e-12);
            }
            prop_assert!((b.psi.row(i).sum() - 1.0).abs() <= 1e-9);
        }
        prop_assert!(max_abs(&(&b.psi_c - (&b.psi - &b.psi_q))) <= 1e-15);
    }

    #[test]
    fn laws_are_distribution_functions((model, variant) in arb_model_and_variant()) {
        let law = law_of(&model, &variant);
        prop_assert!((law.total_mass() - 1.0).abs() <= 1e-10);
        prop_assert!(spectral_abscissa(law.k()).unwrap() < 0.0);
        if matches!(variant, BoundaryVariant::Standard) {
            prop_assert!(law.mass_zero().iter().all(|x| *x == 0.0));
        }
        let mut prev = RowVector::zeros(model.phases());
        for k in 0..60 {
            let g = law.eval(Level::At(k as f64 * 0.1)).unwrap();
            for i in 0..model.phases() {
                prop_assert!(g[i] >= -1e-12 && g[i] <= 1.0 + 1e-12);
                prop_assert!(g[i] >= prev[i] - 1e-12);
            }
            prev = g;
        }
        let top = law.eval(Level::Infinity).unwrap();
        prop_assert!((top.sum() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn regenerative_form_is_q_invariant((model, variant) in arb_model_and_variant(), q1 in 0.1f64..5.0, q2 in 0.1f64..5.0) {
        let a = regen_cdf(&variant, &model, q1).unwrap();
        let b = regen_cdf(&variant, &model, q2).unwrap();
        let exact = law_of(&model, &variant);
        let xs = grid(100, 4.0);
        prop_assert!(sup_distance(&a, &b, &xs) <= 1e-8);
        prop_assert!(sup_distance(&a, &exact, &xs) <= 1e-8);
    }

    #[test]
    fn rho_is_the_stationary_vector_of_phi((model, variant) in arb_model_and_variant(), q in 0.1f64..5.0) {
        let rho = rho_limit(&variant, &model, q).unwrap();
        let phi = phi_limit(&variant, &model, q).unwrap();
        prop_assert!((rho.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(rho.iter().all(|x| *x >= -1e-14));
        prop_assert!((&rho * &phi - &rho).amax() <= 1e-10);
    }

    #[test]
    fn regulator_identities(model in arb_model(1..=6)) {
        let kern = StationaryKernel::new(&model).unwrap();
        let ell = kern.ell(&model).unwrap();
        // Σℓ = −αμ
        prop_assert!((ell.sum() + model.drift()).abs() <= 1e-10);
        prop_assert!((&ell * &kern.u).amax() <= 1e-12 * inf_norm(&kern.u).max(1.0));
        prop_assert!(ell.iter().all(|x| *x > 0.0));
        // ℓ ∝ νΘ and αΘK ∝ ν
        prop_assert!(direction_distance(&ell, &(&kern.nu * model.theta())) <= 1e-10);
        let chain = model.alpha() * model.theta() * &kern.k;
        prop_assert!(direction_distance(&chain, &kern.nu) <= 1e-10);
        prop_assert!((&kern.nu * model.theta() * &kern.u).amax() <= 1e-12 * inf_norm(&kern.u).max(1.0));
    }

    #[test]
    fn resampling_matrix_is_stochastic(spec in (1usize..=6).prop_flat_map(arb_resample)) {
        let m = spec.b().nrows();
        let ones = Vector::from_element(m, 1.0);
        prop_assert!((spec.b() * &ones - &ones).amax() <= 1e-12);
        prop_assert!((spec.beta() * spec.b() - spec.beta()).amax() <= 1e-12);
        prop_assert!(spec.b().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn validation_is_all_or_nothing(
        m in 1usize..=4,
        raw in proptest::collection::vec(-3.0f64..3.0, 16),
        mu in proptest::collection::vec(-3.0f64..3.0, 4),
        sigma in proptest::collection::vec(-0.5f64..3.0, 4),
    ) {
        let q = Matrix::from_fn(m, m, |i, j| raw[i * 4 + j]);
        match mmbm_core::model::validate_model(q, Vector::from_column_slice(&mu[..m]), Vector::from_column_slice(&sigma[..m])) {
            Ok(model) => {
                prop_assert!(model.drift() < 0.0);
                let law = stationary_standard(&model).unwrap().law;
                prop_assert!((law.total_mass() - 1.0).abs() <= 1e-10);
                prop_assert!(regen_cdf(&BoundaryVariant::Standard, &model, 1.0).is_ok());
            }
            Err(e) => prop_assert!(!e.is_numerical(), "{e}"),
        }
    }
}
