mod common;

use common::*;
use mmbm_core::numkernel::{direction_distance, inf_norm, solve_stable_quadratic};
use mmbm_core::regenerative::*;
use mmbm_core::stationary::{stationary_resampled, stationary_standard, stationary_sticky, StationaryKernel};
use mmbm_core::{BoundaryVariant, Level, Matrix, PhaseCdf};

fn closed_form(v: &BoundaryVariant, model: &mmbm_core::MmbmModel) -> PhaseCdf {
    match v {
        BoundaryVariant::Standard => stationary_standard(model).unwrap().law,
        BoundaryVariant::Sticky(s) => stationary_sticky(model, s).unwrap(),
        BoundaryVariant::Resampled(r) => stationary_resampled(model, r).unwrap(),
    }
}

#[test]
fn regenerative_law_is_q_invariant() {
    let model = reference();
    let xs = grid(100, 5.0);
    for v in reference_variants() {
        let want = closed_form(&v, &model);
        for q in [0.25, 1.0, 4.0] {
            let got = regen_cdf(&v, &model, q).unwrap();
            let d = sup_distance(&got, &want, &xs);
            assert!(d <= 1e-8, "{:?} q={q}: {d:e}", v.tag());
        }
    }
}

#[test]
fn kernels_complete_to_one() {
    let model = reference();
    for v in reference_variants() {
        for lambda in [1e3, 1e6] {
            let k = boundary_kernels(&v, &model, lambda, 1.0).unwrap();
            let s = (&k.p0 + &k.p1) * Vector::from_element(2, 1.0);
            assert!((s.add_scalar(-1.0)).amax() < 1e-12, "{:?}", v.tag());
        }
    }
}

use mmbm_core::Vector;

#[test]
fn sticky_p0_expansion() {
    let model = reference();
    let v = sticky(&[1.0, 2.0]);
    let q = 1.0;
    let qa_inv = Matrix::from_diagonal(&vector(&[1.0, 0.5]));
    let mut last = f64::INFINITY;
    for lambda in [1e4, 1e6] {
        let k = boundary_kernels(&v, &model, lambda, q).unwrap();
        let err = (k.p0 * lambda.sqrt() - &qa_inv).amax();
        assert!(err < last && err < 2.0 / lambda.sqrt(), "{err}");
        last = err;
    }
}

#[test]
fn resampled_p1_tends_to_b() {
    let model = reference();
    let v = resampled();
    let BoundaryVariant::Resampled(spec) = &v else { unreachable!() };
    let k = boundary_kernels(&v, &model, 1e8, 1.0).unwrap();
    assert!((k.p1 - spec.b()).amax() <= 1e-3);
}

#[test]
fn finite_phi_is_stochastic() {
    let model = reference();
    for v in reference_variants() {
        let phi = phi_transition_finite(&v, &model, 1e4, 1.0).unwrap();
        for i in 0..2 {
            assert!((phi.row(i).sum() - 1.0).abs() < 1e-10, "{:?}", v.tag());
        }
    }
}

#[test]
fn standard_phi_limit() {
    let model = reference();
    let phi = phi_transition_finite(&BoundaryVariant::Standard, &model, 1e6, 1.0).unwrap();
    let lim = phi_limit(&BoundaryVariant::Standard, &model, 1.0).unwrap();
    assert!(inf_norm(&(phi - lim)) <= 1e-2);
}

#[test]
fn resampled_phi_is_rank_one_at_large_lambda() {
    let model = reference();
    let v = resampled();
    let phi = phi_transition_finite(&v, &model, 1e8, 1.0).unwrap();
    let rho = rho_limit(&v, &model, 1.0).unwrap();
    let spread = (0..2).map(|j| (phi[(0, j)] - phi[(1, j)]).abs()).fold(0.0, f64::max);
    assert!(spread <= 1e-3, "{spread}");
    for i in 0..2 {
        assert!((phi.row(i) - &rho).amax() <= 1e-3);
    }
}

#[test]
fn rho_is_fixed_point_of_limit_phi() {
    let model = reference();
    for v in reference_variants() {
        for q in [0.5, 1.0, 3.0] {
            let rho = rho_limit(&v, &model, q).unwrap();
            let phi = phi_limit(&v, &model, q).unwrap();
            assert!((rho.sum() - 1.0).abs() < 1e-12);
            assert!(rho.iter().all(|x| *x > 0.0));
            assert!((&rho * &phi - &rho).amax() < 1e-10, "{:?}", v.tag());
        }
    }
}

#[test]
fn rho_collinearities() {
    let model = reference();
    let kern = StationaryKernel::new(&model).unwrap();
    let q = 1.0;
    let uq = solve_stable_quadratic(model.generator(), model.mu(), model.sigma(), q).unwrap().u;
    let rho = rho_limit(&BoundaryVariant::Standard, &model, q).unwrap();
    let lhs = &rho * (-&uq).try_inverse().unwrap();
    assert!(direction_distance(&lhs, &(&kern.nu * model.theta())) <= 1e-10);

    let rho = rho_limit(&sticky(&[1.0, 2.0]), &model, q).unwrap();
    let w = Matrix::from_diagonal(&vector(&[1.0, 0.5])) - model.theta() * &uq;
    let lhs = &rho * w.try_inverse().unwrap();
    assert!(direction_distance(&lhs, &kern.nu) <= 1e-10);
}

#[test]
fn boundary_occupation_directions() {
    let model = reference();
    let kern = StationaryKernel::new(&model).unwrap();
    let law = expected_sojourn(&sticky(&[1.0, 2.0]), &model, 1.0).unwrap();
    let nu_a = kern.nu.component_div(&vector(&[1.0, 2.0]).transpose());
    assert!(direction_distance(&(&law.rho * &law.m_zero), &nu_a) <= 1e-10);

    let v = resampled();
    let BoundaryVariant::Resampled(spec) = &v else { unreachable!() };
    let law = expected_sojourn(&v, &model, 1.0).unwrap();
    let want = spec.beta() * (-spec.a_tilde()).try_inverse().unwrap();
    assert!(direction_distance(&(&law.rho * &law.m_zero), &want) <= 1e-10);
    for x in [Level::At(0.0), Level::At(0.7), Level::Infinity] {
        let mx = law.eval(x).unwrap();
        assert!((mx.row(0) - mx.row(1)).amax() <= 1e-12);
    }
}

#[test]
fn cycle_vectors_match_sojourn_at_infinity() {
    let model = reference();
    for v in reference_variants() {
        let law = expected_sojourn(&v, &model, 1.0).unwrap();
        let total = law.eval(Level::Infinity).unwrap() * Vector::from_element(2, 1.0);
        assert!((total - &law.m_vec).amax() < 1e-10);
        let mut prev = law.eval(Level::At(0.0)).unwrap();
        assert!(prev.iter().all(|x| *x >= 0.0));
        for i in 1..40 {
            let cur = law.eval(Level::At(0.1 * i as f64)).unwrap();
            assert!((&cur - &prev).min() >= -1e-14);
            prev = cur;
        }
    }
}

#[test]
fn gamma_tilde_normalizes_rho_tilde() {
    let model = reference();
    let v = resampled();
    let BoundaryVariant::Resampled(spec) = &v else { unreachable!() };
    let law = stationary_resampled(&model, spec).unwrap();
    // The regeneration-form constant γ̃ varies with q; the law does not.
    let g1 = gamma_tilde(&model, spec, 0.5).unwrap();
    let g2 = gamma_tilde(&model, spec, 2.0).unwrap();
    assert!((g1 - g2).abs() > 1e-3);
    for q in [0.5, 2.0] {
        let rho = rho_limit(&v, &model, q).unwrap();
        assert!((rho.sum() - 1.0).abs() < 1e-12);
        let alt = regen_cdf(&v, &model, q).unwrap();
        assert!(sup_distance(&alt, &law, &grid(50, 4.0)) < 1e-10);
    }
}

#[test]
fn asymptotic_errors_are_bounded() {
    let model = reference();
    let lambdas = [1e3, 1e4, 1e5];
    for v in reference_variants() {
        let rows = asymptotic_report(&v, &model, 1.0, &lambdas).unwrap();
        for r in &rows {
            eprintln!("{:?} {:?}", v.tag(), r);
        }
        let ratio = |f: fn(&AsymptoticRow) -> f64| {
            let xs: Vec<f64> = rows.iter().map(f).collect();
            xs.iter().cloned().fold(0.0, f64::max) / xs.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        assert!(ratio(|r| r.err_psi_scaled) <= 3.0);
        assert!(ratio(|r| r.err_phi_scaled) <= 3.0, "{:?}", v.tag());
    }
}
