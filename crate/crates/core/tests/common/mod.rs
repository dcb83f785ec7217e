#![allow(dead_code)]

use mmbm_core::model::validate_resample;
use mmbm_core::stationary::{evaluate_cdf, CdfTable};
use mmbm_core::{BoundaryVariant, Level, Matrix, MmbmModel, PhaseCdf, StickySpec, Vector};

pub fn mat(n: usize, x: &[f64]) -> Matrix {
    Matrix::from_row_slice(n, n, x)
}

pub fn vector(x: &[f64]) -> Vector {
    Vector::from_vec(x.to_vec())
}

/// Q = [[-1,1],[2,-2]], μ = (-1,-3), σ = (1,2).
pub fn reference() -> MmbmModel {
    MmbmModel::new(mat(2, &[-1.0, 1.0, 2.0, -2.0]), vector(&[-1.0, -3.0]), vector(&[1.0, 2.0])).unwrap()
}

pub fn scalar(mu: f64, sigma: f64) -> MmbmModel {
    MmbmModel::new(Matrix::zeros(1, 1), vector(&[mu]), vector(&[sigma])).unwrap()
}

pub fn sticky(a: &[f64]) -> BoundaryVariant {
    BoundaryVariant::Sticky(StickySpec::new(vector(a), a.len()).unwrap())
}

/// A = [[0,1],[1,0]], Ã = -I, Q̃ = 0.
pub fn resampled() -> BoundaryVariant {
    BoundaryVariant::Resampled(
        validate_resample(mat(2, &[0.0, 1.0, 1.0, 0.0]), -Matrix::identity(2, 2), Some(Matrix::zeros(2, 2)), 2)
            .unwrap(),
    )
}

pub fn reference_variants() -> Vec<BoundaryVariant> {
    vec![BoundaryVariant::Standard, sticky(&[1.0, 2.0]), resampled()]
}

/// `n` evenly spaced levels on `[0, top]`.
pub fn grid(n: usize, top: f64) -> Vec<Level> {
    (0..n).map(|i| Level::At(top * i as f64 / (n - 1) as f64)).collect()
}

pub fn table(law: &PhaseCdf, xs: &[Level]) -> CdfTable {
    evaluate_cdf(law, xs).unwrap()
}

/// Sup-norm distance between two laws on a grid.
pub fn sup_distance(a: &PhaseCdf, b: &PhaseCdf, xs: &[Level]) -> f64 {
    let ta = table(a, xs);
    let tb = table(b, xs);
    ta.rows.iter().zip(&tb.rows).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

/// Random validated models: dense positive off-diagonal rates, so `Q` is
/// irreducible, and means shifted to give drift `−δ`.
pub fn arb_model(phases: std::ops::RangeInclusive<usize>) -> impl proptest::strategy::Strategy<Value = MmbmModel> {
    use proptest::prelude::*;
    phases.prop_flat_map(|m| {
        (
            proptest::collection::vec(0.05f64..3.0, m * m),
            proptest::collection::vec(-3.0f64..3.0, m),
            proptest::collection::vec(0.3f64..3.0, m),
            0.1f64..2.0,
        )
            .prop_map(move |(rates, mu, sigma, delta)| {
                let mut q = Matrix::from_row_slice(m, m, &rates);
                for i in 0..m {
                    q[(i, i)] = 0.0;
                    let s: f64 = q.row(i).sum();
                    q[(i, i)] = -s;
                }
                let mu = Vector::from_vec(mu);
                let drift = mmbm_core::model::stationary_drift(&q, &mu).unwrap();
                let mu = mu.add_scalar(-drift - delta);
                MmbmModel::new(q, mu, Vector::from_vec(sigma)).unwrap()
            })
    })
}
