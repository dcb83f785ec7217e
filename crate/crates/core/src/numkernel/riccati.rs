//! First-return matrices `Ψ_λ(q)` of the flip-flop fluid queue.
//!
//! `Ψ_λ(q)` is the minimal nonnegative solution of the nonsymmetric
//! algebraic Riccati equation
//!
//! ```text
//! λC₊⁻¹ + C₊⁻¹(Q − (λ+q)I)X + X|C₋|⁻¹(Q − (λ+q)I) + λX|C₋|⁻¹X = 0,
//! ```
//!
//! with `C₊ = D + √λΘ` and `|C₋| = √λΘ − D`. Written as
//! `XCX − XD − AX + B = 0` its coefficient matrix `[[D, −C], [−B, A]]` is an
//! M-matrix, so the structure-preserving doubling algorithm applies and
//! converges quadratically to the minimal solution.

use super::linalg::{inf_norm, inverse, solve};
use super::schur::solve_sylvester;
use crate::model::MmbmModel;
use crate::{Error, Matrix, Result};

const STEP_TOL: f64 = 1e-14;
const MAX_DOUBLINGS: usize = 100;

/// `Ψ_λ(q)`, `Ψ_λ = Ψ_λ(0)` and `Ψ^c = Ψ_λ − Ψ_λ(q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiccatiSolution {
    pub lambda: f64,
    pub q: f64,
    /// Return to level zero before the timer expires.
    pub psi_q: Matrix,
    /// Return to level zero, timer ignored.
    pub psi: Matrix,
    /// Return to level zero after the timer has expired.
    pub psi_c: Matrix,
    /// Riccati residual of `psi_q`, infinity norm.
    pub residual: f64,
}

struct Coefficients {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
}

fn coefficients(model: &MmbmModel, lambda: f64, q: f64) -> Coefficients {
    let m = model.phases();
    let sl = libm::sqrt(lambda);
    let up: alloc::vec::Vec<f64> = (0..m).map(|i| model.mu()[i] + sl * model.sigma()[i]).collect();
    let down: alloc::vec::Vec<f64> = (0..m).map(|i| sl * model.sigma()[i] - model.mu()[i]).collect();
    let gen = model.generator();
    let shifted = Matrix::from_fn(m, m, |i, j| if i == j { lambda + q } else { 0.0 } - gen[(i, j)]);
    Coefficients {
        a: Matrix::from_fn(m, m, |i, j| shifted[(i, j)] / up[i]),
        b: Matrix::from_fn(m, m, |i, j| if i == j { lambda / up[i] } else { 0.0 }),
        c: Matrix::from_fn(m, m, |i, j| if i == j { lambda / down[i] } else { 0.0 }),
        d: Matrix::from_fn(m, m, |i, j| shifted[(i, j)] / down[i]),
    }
}

fn residual_of(k: &Coefficients, x: &Matrix) -> Matrix {
    x * &k.c * x - x * &k.d - &k.a * x + &k.b
}

/// Infinity norm of the Riccati residual at `x`.
pub fn riccati_residual(model: &MmbmModel, lambda: f64, q: f64, x: &Matrix) -> f64 {
    let k = coefficients(model, lambda, q);
    inf_norm(&residual_of(&k, x))
}

/// Solves for `Ψ_λ(q)` and `Ψ_λ`.
pub fn solve_riccati_psi(model: &MmbmModel, lambda: f64, q: f64) -> Result<RiccatiSolution> {
    model.check_lambda(lambda)?;
    if !(q.is_finite() && q >= 0.0) {
        return Err(Error::domain("q", q));
    }
    let (psi_q, residual) = minimal_solution(model, lambda, q)?;
    let psi = if q == 0.0 { psi_q.clone() } else { minimal_solution(model, lambda, 0.0)?.0 };
    let psi_c = &psi - &psi_q;
    Ok(RiccatiSolution { lambda, q, psi_q, psi, psi_c, residual })
}

fn minimal_solution(model: &MmbmModel, lambda: f64, q: f64) -> Result<(Matrix, f64)> {
    let k = coefficients(model, lambda, q);
    let (x, doublings) = doubling(&k)?;
    let mut x = x;
    let mut res = inf_norm(&residual_of(&k, &x));
    // One Newton correction: (A − XC)H + H(D − CX) = R(X).
    let lin_a = &k.a - &x * &k.c;
    let lin_b = &k.d - &k.c * &x;
    if let Ok(h) = solve_sylvester(&lin_a, &lin_b, &residual_of(&k, &x)) {
        let cand = &x + h;
        let r = inf_norm(&residual_of(&k, &cand));
        if r < res {
            x = cand;
            res = r;
        }
    }
    if !res.is_finite() {
        return Err(Error::Convergence { what: "Riccati doubling iteration", iterations: doublings, residual: res });
    }
    Ok((x, res))
}

fn doubling(k: &Coefficients) -> Result<(Matrix, usize)> {
    let m = k.a.nrows();
    let id = Matrix::identity(m, m);
    let gamma = (0..m).map(|i| k.a[(i, i)].max(k.d[(i, i)])).fold(0.0, f64::max);
    let a_g = &k.a + &id * gamma;
    let d_g = &k.d + &id * gamma;
    let d_g_inv = inverse(&d_g, "doubling shift D + gamma I")?;
    let a_g_inv = inverse(&a_g, "doubling shift A + gamma I")?;
    let w = &a_g - &k.b * &d_g_inv * &k.c;
    let v = &d_g - &k.c * &a_g_inv * &k.b;
    let w_inv = inverse(&w, "doubling Schur complement W")?;
    let v_inv = inverse(&v, "doubling Schur complement V")?;
    let two_g = 2.0 * gamma;
    let mut e = &id - &v_inv * two_g;
    let mut f = &id - &w_inv * two_g;
    let mut g = &d_g_inv * &k.c * &w_inv * two_g;
    let mut h = &w_inv * &k.b * &d_g_inv * two_g;

    let mut last_step = f64::INFINITY;
    for it in 1..=MAX_DOUBLINGS {
        let igh = &id - &g * &h;
        let ihg = &id - &h * &g;
        // (I − GH)⁻¹E and (I − HG)⁻¹F
        let igh_e = solve(&igh, &e, "doubling factor I - GH")?;
        let ihg_f = solve(&ihg, &f, "doubling factor I - HG")?;
        let igh_g = solve(&igh, &g, "doubling factor I - GH")?;
        let ihg_h = solve(&ihg, &h, "doubling factor I - HG")?;
        let h_next = &h + &f * &ihg_h * &e;
        let g_next = &g + &e * &igh_g * &f;
        let e_next = &e * igh_e;
        let f_next = &f * ihg_f;
        let step = inf_norm(&(&h_next - &h));
        h = h_next;
        g = g_next;
        e = e_next;
        f = f_next;
        if !step.is_finite() {
            break;
        }
        // Stop at the tolerance, or once the update stops shrinking, which
        // after quadratic convergence means roundoff has been reached.
        if step <= STEP_TOL * inf_norm(&h).max(1.0) || (step >= last_step && step < 1e-10) {
            return Ok((h, it));
        }
        last_step = step;
    }
    Err(Error::Convergence {
        what: "Riccati doubling iteration",
        iterations: MAX_DOUBLINGS,
        residual: inf_norm(&residual_of(k, &h)),
    })
}
