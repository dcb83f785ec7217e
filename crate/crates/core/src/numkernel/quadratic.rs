//! The stable solvent `U(q)` of `½Θ²X² + DX + (Q − qI) = 0`.

use super::linalg::{check_finite, check_square, inf_norm};
use super::schur::{solve_sylvester, ComplexSchur, C64};
use crate::{Error, Matrix, Result, Vector};

/// Half-width of the band around the imaginary axis inside which an
/// eigenvalue of the companion matrix counts as zero.
pub const SUBSPACE_BAND: f64 = 1e-9;

const RESIDUAL_TOL: f64 = 1e-10;
const NEWTON_STEPS: usize = 2;

/// `U(q)` together with the residual it achieves.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSolution {
    pub q: f64,
    pub u: Matrix,
    /// `‖½Θ²U² + DU + (Q − qI)‖_∞`.
    pub residual_norm: f64,
}

/// `‖½Θ²X² + DX + (Q − qI)‖_∞`.
pub fn quadratic_residual(q_gen: &Matrix, mu: &Vector, sigma: &Vector, q: f64, x: &Matrix) -> f64 {
    inf_norm(&residual_matrix(q_gen, mu, sigma, q, x))
}

fn residual_matrix(q_gen: &Matrix, mu: &Vector, sigma: &Vector, q: f64, x: &Matrix) -> Matrix {
    let m = x.nrows();
    let x2 = x * x;
    Matrix::from_fn(m, m, |i, j| {
        let shift = if i == j { q } else { 0.0 };
        0.5 * sigma[i] * sigma[i] * x2[(i, j)] + mu[i] * x[(i, j)] + q_gen[(i, j)] - shift
    })
}

/// Computes `U(q)`: the solution whose eigenvalues are the `m` eigenvalues
/// of the companion pencil with nonpositive real part.
///
/// At `q = 0` exactly one eigenvalue in `[−ε₀, ε₀]` (ε₀ = [`SUBSPACE_BAND`])
/// is admitted; for `q > 0` any eigenvalue in that band is an error.
pub fn solve_stable_quadratic(q_gen: &Matrix, mu: &Vector, sigma: &Vector, q: f64) -> Result<QuadraticSolution> {
    check_square("Q", q_gen)?;
    let m = q_gen.nrows();
    for (what, v) in [("mu", mu), ("sigma", sigma)] {
        if v.len() != m {
            return Err(Error::Shape { what: what.into(), expected: m, found: v.len() });
        }
    }
    check_finite("Q", q_gen.as_slice())?;
    check_finite("mu", mu.as_slice())?;
    check_finite("sigma", sigma.as_slice())?;
    if let Some(i) = sigma.iter().position(|s| *s <= 0.0) {
        return Err(Error::NonPositiveVolatility { phase: i, sigma: sigma[i] });
    }
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::domain("q", q));
    }

    // C [I; U] = [I; U] U
    let n = 2 * m;
    let mut c = Matrix::zeros(n, n);
    for i in 0..m {
        c[(i, m + i)] = 1.0;
        let s = 2.0 / (sigma[i] * sigma[i]);
        for j in 0..m {
            let shift = if i == j { q } else { 0.0 };
            c[(m + i, j)] = -s * (q_gen[(i, j)] - shift);
        }
        c[(m + i, m + i)] = -s * mu[i];
    }

    let mut schur = ComplexSchur::new(&c)?;
    let eig = schur.eigenvalues();
    let mut in_band = eig.iter().copied().filter(|z| z.re.abs() <= SUBSPACE_BAND);
    let allowed = if q == 0.0 { 1 } else { 0 };
    if let Some(z) = in_band.nth(allowed) {
        return Err(Error::Ambiguous { re: z.re, im: z.im });
    }
    let found = schur.reorder(|z| z.re <= SUBSPACE_BAND);
    if found != m {
        return Err(Error::SubspaceDimension { expected: m, found });
    }

    let z11 = schur.z.view((0, 0), (m, m)).into_owned();
    let z21 = schur.z.view((m, 0), (m, m)).into_owned();
    let u = recover(&z11, &z21)?;

    let (u, residual_norm) = refine(q_gen, mu, sigma, q, u);
    if !(residual_norm <= RESIDUAL_TOL) {
        return Err(Error::Convergence {
            what: "quadratic matrix equation",
            iterations: NEWTON_STEPS,
            residual: residual_norm,
        });
    }
    Ok(QuadraticSolution { q, u, residual_norm })
}

fn recover(z11: &nalgebra::DMatrix<C64>, z21: &nalgebra::DMatrix<C64>) -> Result<Matrix> {
    // The selected subspace is real, so Z21 Z11⁻¹ is real up to roundoff.
    let lu = z11.transpose().lu();
    let ut = lu.solve(&z21.transpose()).ok_or(Error::Singular { what: "basis of the stable subspace" })?;
    let u = ut.transpose().map(|z| z.re);
    if u.iter().any(|x| !x.is_finite()) {
        return Err(Error::Singular { what: "basis of the stable subspace" });
    }
    Ok(u)
}

/// Newton steps on the scaled residual `X² + 2Θ⁻²DX + 2Θ⁻²(Q − qI)`,
/// keeping a step only if it lowers the residual.
fn refine(q_gen: &Matrix, mu: &Vector, sigma: &Vector, q: f64, mut u: Matrix) -> (Matrix, f64) {
    let m = u.nrows();
    let mut best = quadratic_residual(q_gen, mu, sigma, q, &u);
    let drift = Matrix::from_diagonal(&Vector::from_fn(m, |i, _| 2.0 * mu[i] / (sigma[i] * sigma[i])));
    for _ in 0..NEWTON_STEPS {
        if best == 0.0 {
            break;
        }
        let r = residual_matrix(q_gen, mu, sigma, q, &u);
        let scaled = Matrix::from_fn(m, m, |i, j| -2.0 * r[(i, j)] / (sigma[i] * sigma[i]));
        let a = &u + &drift;
        let Ok(h) = solve_sylvester(&a, &u, &scaled) else {
            break;
        };
        let cand = &u + h;
        let res = quadratic_residual(q_gen, mu, sigma, q, &cand);
        if res < best {
            u = cand;
            best = res;
        } else {
            break;
        }
    }
    (u, best)
}
