//! The Markov-regenerative layer. Regeneration epochs are the first hits
//! of level zero after an independent exponential timer of rate `q`
//! expires; the stationary law is then `G(x) = ρM(x)/(ρm)` with `ρ` the
//! phase distribution at regeneration epochs, `M(x)` the expected time
//! spent in `[0, x]` per cycle and `m = M(∞)1`.
//!
//! Limiting objects (`λ → ∞`) come from closed forms. Finite-`λ` objects of
//! the flip-flop approximation exist for the asymptotic checks and the
//! simulator comparisons.

use alloc::vec::Vec;

use crate::model::{BoundaryVariant, MmbmModel, ResampleSpec};
use crate::numkernel::{
    inf_norm, inverse, ones, solve_riccati_psi, solve_stable_quadratic, stationary_row_vector, MatrixKind,
};
use crate::stationary::{Level, PhaseCdf, StationaryKernel};
use crate::{Error, Matrix, Result, RowVector, Vector};

/// Boundary kernels of the flip-flop queue started at level zero:
/// `P0` (timer expires first, phase at expiry) and `P1` (level leaves zero
/// first, phase at departure).
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryKernels {
    pub p0: Matrix,
    pub p1: Matrix,
}

fn check_q(q: f64) -> Result<()> {
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::domain("q", q));
    }
    Ok(())
}

pub fn boundary_kernels(variant: &BoundaryVariant, model: &MmbmModel, lambda: f64, q: f64) -> Result<BoundaryKernels> {
    model.check_lambda(lambda)?;
    check_q(q)?;
    variant.check_against(model)?;
    let m = model.phases();
    let id = Matrix::identity(m, m);
    let gen = model.generator();
    let sl = libm::sqrt(lambda);
    let (r, p1_right, p1_scale) = match variant {
        BoundaryVariant::Standard => {
            let r = inverse(&(&id * (lambda + q) - gen), "standard boundary resolvent")?;
            (r, None, lambda)
        }
        BoundaryVariant::Sticky(s) => {
            let a = s.a_matrix();
            let r = inverse(&(&a * sl + &id * q - &a * gen / sl), "sticky boundary resolvent")?;
            (r, Some(a), sl)
        }
        BoundaryVariant::Resampled(s) => {
            let qt = s.q_tilde_for(model)?;
            let r = inverse(&(-s.a_tilde() * sl + &id * q - qt / sl), "resampled boundary resolvent")?;
            (r, Some(s.a().clone()), sl)
        }
    };
    let p0 = &r * q;
    let p1 = match p1_right {
        None => r * p1_scale,
        Some(a) => r * a * p1_scale,
    };
    Ok(BoundaryKernels { p0, p1 })
}

/// `Φ_λ = I − (I − P1Ψ_λ(q))⁻¹(I − P0 − P1Ψ_λ)`.
pub fn phi_transition_finite(variant: &BoundaryVariant, model: &MmbmModel, lambda: f64, q: f64) -> Result<Matrix> {
    let k = boundary_kernels(variant, model, lambda, q)?;
    let psi = solve_riccati_psi(model, lambda, q)?;
    let m = model.phases();
    let id = Matrix::identity(m, m);
    let lhs = &id - &k.p1 * &psi.psi_q;
    let rhs = &id - &k.p0 - &k.p1 * &psi.psi;
    let lu = lhs.lu();
    let x = lu.solve(&rhs).ok_or(Error::Singular { what: "I - P1 Psi(q)" })?;
    Ok(id - x)
}

/// Stationary vector of `Φ_λ`.
pub fn rho_finite(variant: &BoundaryVariant, model: &MmbmModel, lambda: f64, q: f64) -> Result<RowVector> {
    stationary_row_vector(&phi_transition_finite(variant, model, lambda, q)?, MatrixKind::Stochastic)
}

/// `U`, `U(q)` and derived quantities shared by the limiting formulas.
struct Limits {
    kern: StationaryKernel,
    uq: Matrix,
}

impl Limits {
    fn new(model: &MmbmModel, q: f64) -> Result<Self> {
        check_q(q)?;
        let kern = StationaryKernel::new(model)?;
        let uq = solve_stable_quadratic(model.generator(), model.mu(), model.sigma(), q)?.u;
        Ok(Self { kern, uq })
    }
}

/// `(qA⁻¹ − ΘU(q))⁻¹` for the sticky boundary.
fn sticky_w(model: &MmbmModel, a: &Vector, uq: &Matrix, q: f64) -> Result<Matrix> {
    let m = model.phases();
    let s = model.sigma();
    let x = Matrix::from_fn(m, m, |i, j| if i == j { q / a[i] } else { 0.0 } - s[i] * uq[(i, j)]);
    inverse(&x, "qA^-1 - Theta U(q)")
}

/// `γ̃ = (β(q(−Ã)⁻¹ − ΘU(q))1)⁻¹`, the constant that makes `ρ̃` a
/// probability vector.
pub fn gamma_tilde(model: &MmbmModel, spec: &ResampleSpec, q: f64) -> Result<f64> {
    let lim = Limits::new(model, q)?;
    gamma_tilde_with(model, spec, &lim.uq, q)
}

fn gamma_tilde_with(model: &MmbmModel, spec: &ResampleSpec, uq: &Matrix, q: f64) -> Result<f64> {
    let nat_inv = inverse(&(-spec.a_tilde()), "-Atilde")?;
    let x = spec.beta() * (nat_inv * q - model.theta() * uq) * ones(model.phases());
    Ok(1.0 / x[0])
}

/// Limit of `Φ_λ` as `λ → ∞`.
pub fn phi_limit(variant: &BoundaryVariant, model: &MmbmModel, q: f64) -> Result<Matrix> {
    variant.check_against(model)?;
    let lim = Limits::new(model, q)?;
    phi_limit_with(variant, model, &lim, q)
}

fn phi_limit_with(variant: &BoundaryVariant, model: &MmbmModel, lim: &Limits, q: f64) -> Result<Matrix> {
    let m = model.phases();
    let id = Matrix::identity(m, m);
    let u = &lim.kern.u;
    Ok(match variant {
        BoundaryVariant::Standard => id - inverse(&lim.uq, "U(q)")? * u,
        BoundaryVariant::Sticky(s) => id + sticky_w(model, s.a(), &lim.uq, q)? * model.theta() * u,
        BoundaryVariant::Resampled(s) => {
            let rho = rho_tilde(model, s, lim, q)?;
            ones(m) * rho
        }
    })
}

fn rho_tilde(model: &MmbmModel, spec: &ResampleSpec, lim: &Limits, q: f64) -> Result<RowVector> {
    let g = gamma_tilde_with(model, spec, &lim.uq, q)?;
    let nat_inv = inverse(&(-spec.a_tilde()), "-Atilde")?;
    Ok(spec.beta() * (nat_inv * q + model.theta() * (&lim.kern.u - &lim.uq)) * g)
}

/// Limit of the phase distribution at regeneration epochs.
///
/// For the standard and sticky boundaries this is the stationary vector of
/// the limiting `Φ`; for resampling it is the common row of the rank-one
/// limit.
pub fn rho_limit(variant: &BoundaryVariant, model: &MmbmModel, q: f64) -> Result<RowVector> {
    variant.check_against(model)?;
    let lim = Limits::new(model, q)?;
    rho_limit_with(variant, model, &lim, q)
}

fn rho_limit_with(variant: &BoundaryVariant, model: &MmbmModel, lim: &Limits, q: f64) -> Result<RowVector> {
    match variant {
        BoundaryVariant::Resampled(s) => rho_tilde(model, s, lim, q),
        _ => stationary_row_vector(&phi_limit_with(variant, model, lim, q)?, MatrixKind::Stochastic),
    }
}

/// Regeneration-cycle quantities for one boundary variant and timer rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RegenerationLaw {
    pub q: f64,
    pub rho: RowVector,
    /// Expected cycle length per starting phase, `M(∞)1`.
    pub m_vec: Vector,
    /// Expected time at level zero per cycle.
    pub m_zero: Matrix,
    pub m_slope: Matrix,
    pub k: Matrix,
    pub sigma: Vector,
}

impl RegenerationLaw {
    /// `M(x) = M_zero + M_slope(I − e^{Kx})Θ⁻¹`.
    pub fn eval(&self, x: Level) -> Result<Matrix> {
        let m = self.k.nrows();
        let shape = match x {
            Level::Infinity => Matrix::identity(m, m),
            Level::At(0.0) => Matrix::zeros(m, m),
            Level::At(v) => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::domain("x", v));
                }
                Matrix::identity(m, m) - crate::numkernel::matrix_exponential(&self.k, v)?
            }
        };
        let ti = Matrix::from_diagonal(&self.sigma.map(|s| 1.0 / s));
        Ok(&self.m_zero + &self.m_slope * shape * ti)
    }

    /// Mean cycle length in stationarity, `ρm`.
    pub fn mean_cycle(&self) -> f64 {
        self.rho.dot(&self.m_vec.transpose())
    }
}

pub fn expected_sojourn(variant: &BoundaryVariant, model: &MmbmModel, q: f64) -> Result<RegenerationLaw> {
    variant.check_against(model)?;
    let lim = Limits::new(model, q)?;
    let m = model.phases();
    let neg_k_inv = &lim.kern.neg_k_inv;
    let (m_zero, m_slope) = match variant {
        BoundaryVariant::Standard => {
            let neg_uq_inv = inverse(&(-&lim.uq), "U(q)")?;
            (Matrix::zeros(m, m), neg_uq_inv * model.theta_inv() * neg_k_inv * 2.0)
        }
        BoundaryVariant::Sticky(s) => {
            let w = sticky_w(model, s.a(), &lim.uq, q)?;
            let a_inv = Matrix::from_diagonal(&s.a().map(|x| 1.0 / x));
            (&w * a_inv, &w * neg_k_inv * 2.0)
        }
        BoundaryVariant::Resampled(s) => {
            let g = gamma_tilde_with(model, s, &lim.uq, q)?;
            let nat_inv = inverse(&(-s.a_tilde()), "-Atilde")?;
            let one_beta = ones(m) * s.beta() * g;
            (&one_beta * nat_inv, &one_beta * neg_k_inv * 2.0)
        }
    };
    let rho = rho_limit_with(variant, model, &lim, q)?;
    let m_vec = (&m_zero + &m_slope * model.theta_inv()) * ones(m);
    Ok(RegenerationLaw { q, rho, m_vec, m_zero, m_slope, k: lim.kern.k.clone(), sigma: model.sigma().clone() })
}

/// `G(x) = ρM(x)/(ρm)`, repackaged in the unified form.
pub fn regen_cdf(variant: &BoundaryVariant, model: &MmbmModel, q: f64) -> Result<PhaseCdf> {
    let law = expected_sojourn(variant, model, q)?;
    regen_cdf_from(&law)
}

pub fn regen_cdf_from(law: &RegenerationLaw) -> Result<PhaseCdf> {
    let c = 1.0 / law.mean_cycle();
    PhaseCdf::new(&law.rho * &law.m_zero * c, &law.rho * &law.m_slope * c, law.k.clone(), law.sigma.clone())
}

/// One row of [`asymptotic_report`]: each error is the remainder after the
/// known expansion terms, multiplied by the inverse of its expected order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticRow {
    pub lambda: f64,
    /// `‖Ψ_λ(q) − I − ΘU(q)/√λ‖·λ`.
    pub err_psi_scaled: f64,
    /// `‖Φ_λ − Φ‖·√λ`.
    pub err_phi_scaled: f64,
    /// `‖P0 − P0'/√λ‖·λ`, with `P0'` the variant's first-order term.
    pub err_p0_scaled: f64,
    /// `‖P1 − P1⁰ − P1'/√λ‖·λ`.
    pub err_p1_scaled: f64,
}

/// Compares finite-`λ` objects with their expansions in `1/√λ`, infinity
/// norm throughout.
pub fn asymptotic_report(
    variant: &BoundaryVariant,
    model: &MmbmModel,
    q: f64,
    lambdas: &[f64],
) -> Result<Vec<AsymptoticRow>> {
    variant.check_against(model)?;
    let lim = Limits::new(model, q)?;
    let phi = phi_limit_with(variant, model, &lim, q)?;
    let m = model.phases();
    let id = Matrix::identity(m, m);
    let theta_uq = model.theta() * &lim.uq;
    // P0 ≈ P0'/√λ and P1 ≈ P1⁰ + P1'/√λ, remainders O(1/λ).
    let (p0_first, p1_lead, p1_first) = match variant {
        BoundaryVariant::Standard => (Matrix::zeros(m, m), id.clone(), Matrix::zeros(m, m)),
        BoundaryVariant::Sticky(s) => {
            let qa_inv = Matrix::from_diagonal(&s.a().map(|x| q / x));
            (qa_inv.clone(), id.clone(), -qa_inv)
        }
        BoundaryVariant::Resampled(s) => {
            let nat_inv = inverse(&(-s.a_tilde()), "-Atilde")?;
            let p1_first = -(&nat_inv * s.b()) * q;
            (nat_inv * q, s.b().clone(), p1_first)
        }
    };
    let mut rows = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let sl = libm::sqrt(lambda);
        let psi = solve_riccati_psi(model, lambda, q)?;
        let err_psi = inf_norm(&(&psi.psi_q - &id - &theta_uq / sl)) * lambda;
        let phi_l = phi_transition_finite(variant, model, lambda, q)?;
        let err_phi = inf_norm(&(phi_l - &phi)) * sl;
        let k = boundary_kernels(variant, model, lambda, q)?;
        let err_p0 = inf_norm(&(&k.p0 - &p0_first / sl)) * lambda;
        let err_p1 = inf_norm(&(&k.p1 - &p1_lead - &p1_first / sl)) * lambda;
        rows.push(AsymptoticRow {
            lambda,
            err_psi_scaled: err_psi,
            err_phi_scaled: err_phi,
            err_p0_scaled: err_p0,
            err_p1_scaled: err_p1,
        });
    }
    Ok(rows)
}
