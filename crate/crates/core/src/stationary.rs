//! Closed-form stationary laws at level zero's three behaviours, and the
//! auxiliary objects `K`, `ν` and `ℓ` they are built from.

use alloc::vec::Vec;

use crate::model::{MmbmModel, ResampleSpec, StickySpec};
use crate::numkernel::{
    inverse, left_null_vector, matrix_exponential, ones, solve_stable_quadratic, spectral_abscissa,
};
use crate::{Error, Matrix, Result, RowVector, Vector};

/// `K` must have spectral abscissa below this.
const STABILITY_MARGIN: f64 = -1e-12;

/// A level at which a CDF is evaluated; `Infinity` gives the phase marginal
/// exactly instead of through a large float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level {
    At(f64),
    Infinity,
}

/// A joint level/phase distribution function
/// `G(x) = w₀ + w₁(I − e^{Kx})Θ⁻¹`, where `G_i(x) = P[Y ≤ x, φ = i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCdf {
    mass_zero: RowVector,
    weight: RowVector,
    k: Matrix,
    sigma: Vector,
}

impl PhaseCdf {
    /// Wraps the four ingredients as given, checking shapes and that `K` is
    /// strictly stable.
    pub fn new(mass_zero: RowVector, weight: RowVector, k: Matrix, sigma: Vector) -> Result<Self> {
        let m = k.nrows();
        crate::numkernel::check_square("K", &k)?;
        for (what, n) in [("mass_zero", mass_zero.len()), ("weight", weight.len()), ("sigma", sigma.len())] {
            if n != m {
                return Err(Error::Shape { what: what.into(), expected: m, found: n });
            }
        }
        check_stable("K", &k)?;
        Ok(Self { mass_zero, weight, k, sigma })
    }

    /// Builds the law from an unnormalised pair, dividing both parts by the
    /// total mass `(w₀ + w₁Θ⁻¹)1`.
    pub fn normalized(w0: RowVector, w1: RowVector, k: Matrix, sigma: Vector) -> Result<Self> {
        let raw = Self::new(w0, w1, k, sigma)?;
        let total = raw.total_mass();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::Singular { what: "normalisation of the stationary law" });
        }
        Ok(Self { mass_zero: raw.mass_zero / total, weight: raw.weight / total, ..raw })
    }

    pub fn phases(&self) -> usize {
        self.k.nrows()
    }

    /// `G(0)`: probability of resting at zero, per phase.
    pub fn mass_zero(&self) -> &RowVector {
        &self.mass_zero
    }

    pub fn weight(&self) -> &RowVector {
        &self.weight
    }

    pub fn k(&self) -> &Matrix {
        &self.k
    }

    pub fn sigma(&self) -> &Vector {
        &self.sigma
    }

    /// `G(∞) = w₀ + w₁Θ⁻¹`.
    pub fn marginal(&self) -> RowVector {
        let s = &self.sigma;
        RowVector::from_fn(self.phases(), |_, j| self.mass_zero[j] + self.weight[j] / s[j])
    }

    /// `G(∞)1`.
    pub fn total_mass(&self) -> f64 {
        self.marginal().sum()
    }

    pub fn eval(&self, x: Level) -> Result<RowVector> {
        match x {
            Level::Infinity => Ok(self.marginal()),
            Level::At(0.0) => Ok(self.mass_zero.clone()),
            Level::At(x) => {
                if !(x.is_finite() && x > 0.0) {
                    return Err(Error::domain("x", x));
                }
                let e = matrix_exponential(&self.k, x)?;
                let m = self.phases();
                let slope = &self.weight * (Matrix::identity(m, m) - e);
                Ok(RowVector::from_fn(m, |_, j| self.mass_zero[j] + slope[j] / self.sigma[j]))
            }
        }
    }
}

/// Per-level rows of a [`PhaseCdf`] evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub levels: Vec<Level>,
    pub rows: Vec<RowVector>,
}

/// Evaluates `law` on a nondecreasing list of levels; `Level::Infinity`
/// may only appear last.
pub fn evaluate_cdf(law: &PhaseCdf, xs: &[Level]) -> Result<CdfTable> {
    let mut prev = 0.0_f64;
    let mut rows = Vec::with_capacity(xs.len());
    for (i, x) in xs.iter().enumerate() {
        match *x {
            Level::At(v) => {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::domain("x", v));
                }
                if v < prev {
                    return Err(Error::malformed("levels", "must be sorted in nondecreasing order"));
                }
                prev = v;
            }
            Level::Infinity if i + 1 != xs.len() => {
                return Err(Error::malformed("levels", "infinity must be the last level"));
            }
            Level::Infinity => {}
        }
        rows.push(law.eval(*x)?);
    }
    Ok(CdfTable { levels: xs.to_vec(), rows })
}

fn check_stable(what: &'static str, k: &Matrix) -> Result<()> {
    let max_real = spectral_abscissa(k)?;
    if !(max_real < STABILITY_MARGIN) {
        return Err(Error::Unstable { what, max_real });
    }
    Ok(())
}

/// `K = ΘUΘ⁻¹ + 2Θ⁻²D` for `U = U(0)`.
pub fn matrix_k(model: &MmbmModel, u: &Matrix) -> Result<Matrix> {
    let s = model.sigma();
    let mu = model.mu();
    let m = model.phases();
    let k = Matrix::from_fn(m, m, |i, j| {
        let diag = if i == j { 2.0 * mu[i] / (s[i] * s[i]) } else { 0.0 };
        s[i] * u[(i, j)] / s[j] + diag
    });
    check_stable("K", &k)?;
    Ok(k)
}

/// The quantities every stationary law shares: `U = U(0)`, `K`, `(−K)⁻¹`
/// and `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryKernel {
    pub u: Matrix,
    pub k: Matrix,
    pub neg_k_inv: Matrix,
    pub nu: RowVector,
}

impl StationaryKernel {
    pub fn new(model: &MmbmModel) -> Result<Self> {
        let u = solve_stable_quadratic(model.generator(), model.mu(), model.sigma(), 0.0)?.u;
        let k = matrix_k(model, &u)?;
        let neg_k_inv = inverse(&(-&k), "K")?;
        let nu = left_null_vector(&(model.theta() * &u), "nu system")?;
        Ok(Self { u, k, neg_k_inv, nu })
    }

    /// `ℓ`: the left null vector of `U` scaled so that
    /// `2ℓΘ⁻¹(−K)⁻¹Θ⁻¹1 = 1`.
    pub fn ell(&self, model: &MmbmModel) -> Result<RowVector> {
        let raw = left_null_vector(&self.u, "ell system")?;
        let ti = model.theta_inv();
        let scale = 2.0 * (&raw * &ti * &self.neg_k_inv * &ti * ones(model.phases()))[0];
        if !(scale.is_finite() && scale != 0.0) {
            return Err(Error::Singular { what: "normalisation of ell" });
        }
        Ok(raw / scale)
    }
}

/// `ν` with `νΘU = 0`, `ν1 = 1`.
pub fn vector_nu(model: &MmbmModel) -> Result<RowVector> {
    Ok(StationaryKernel::new(model)?.nu)
}

/// `ℓ`, the long-run growth rates of the per-phase regulators.
pub fn vector_ell(model: &MmbmModel) -> Result<RowVector> {
    StationaryKernel::new(model)?.ell(model)
}

/// The regulated law in three equivalent parametrisations.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardLaw {
    /// Built from `ν(−K)⁻¹`, normalised.
    pub law: PhaseCdf,
    /// `αΘ`.
    pub alpha_weight: RowVector,
    /// `2ℓΘ⁻¹(−K)⁻¹`.
    pub ell_weight: RowVector,
}

impl StandardLaw {
    pub fn alpha_form(&self) -> Result<PhaseCdf> {
        self.with_weight(&self.alpha_weight)
    }

    pub fn ell_form(&self) -> Result<PhaseCdf> {
        self.with_weight(&self.ell_weight)
    }

    fn with_weight(&self, w: &RowVector) -> Result<PhaseCdf> {
        let m = self.law.phases();
        PhaseCdf::new(RowVector::zeros(m), w.clone(), self.law.k.clone(), self.law.sigma.clone())
    }
}

/// Classical regulated MMBM: no atom at zero.
pub fn stationary_standard(model: &MmbmModel) -> Result<StandardLaw> {
    let kern = StationaryKernel::new(model)?;
    standard_from_kernel(model, &kern)
}

/// [`stationary_standard`] on a precomputed kernel.
pub fn standard_from_kernel(model: &MmbmModel, kern: &StationaryKernel) -> Result<StandardLaw> {
    let m = model.phases();
    let w1 = &kern.nu * &kern.neg_k_inv;
    let law = PhaseCdf::normalized(RowVector::zeros(m), w1, kern.k.clone(), model.sigma().clone())?;
    let alpha_weight = model.alpha() * model.theta();
    let ell = kern.ell(model)?;
    let ell_weight = 2.0 * &ell * model.theta_inv() * &kern.neg_k_inv;
    Ok(StandardLaw { law, alpha_weight, ell_weight })
}

/// Sticky MMBM: atom `∝ νA⁻¹`, continuous part `∝ 2ν(−K)⁻¹`.
pub fn stationary_sticky(model: &MmbmModel, sticky: &StickySpec) -> Result<PhaseCdf> {
    let kern = StationaryKernel::new(model)?;
    sticky_from_kernel(model, &kern, sticky)
}

/// [`stationary_sticky`] on a precomputed kernel.
pub fn sticky_from_kernel(model: &MmbmModel, kern: &StationaryKernel, sticky: &StickySpec) -> Result<PhaseCdf> {
    check_phases(model, sticky.a().len())?;
    let a = sticky.a();
    let w0 = RowVector::from_fn(model.phases(), |_, j| kern.nu[j] / a[j]);
    let w1 = 2.0 * &kern.nu * &kern.neg_k_inv;
    PhaseCdf::normalized(w0, w1, kern.k.clone(), model.sigma().clone())
}

/// Sticky MMBM with phase resampling: atom `∝ β(−Ã)⁻¹`, continuous part
/// `∝ 2β(−K)⁻¹`.
pub fn stationary_resampled(model: &MmbmModel, resample: &ResampleSpec) -> Result<PhaseCdf> {
    let kern = StationaryKernel::new(model)?;
    resampled_from_kernel(model, &kern, resample)
}

/// [`stationary_resampled`] on a precomputed kernel.
pub fn resampled_from_kernel(model: &MmbmModel, kern: &StationaryKernel, resample: &ResampleSpec) -> Result<PhaseCdf> {
    check_phases(model, resample.a().nrows())?;
    let beta = resample.beta();
    let w0 = beta * inverse(&(-resample.a_tilde()), "-Atilde")?;
    let w1 = 2.0 * beta * &kern.neg_k_inv;
    PhaseCdf::normalized(w0, w1, kern.k.clone(), model.sigma().clone())
}

fn check_phases(model: &MmbmModel, found: usize) -> Result<()> {
    if found != model.phases() {
        return Err(Error::Shape { what: "boundary specification".into(), expected: model.phases(), found });
    }
    Ok(())
}

/// Stationary distribution of scalar sticky Brownian motion with drift
/// `μ < 0`, volatility `σ` and stickiness `ω`:
/// `|μ|/(|μ|+ω) + ω/(|μ|+ω)(1 − e^{2μx/σ²})`.
pub fn scalar_sticky_reference(mu: f64, sigma: f64, omega: f64, x: f64) -> Result<f64> {
    if !(mu < 0.0 && mu.is_finite()) {
        return Err(Error::domain("mu", mu));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain("sigma", sigma));
    }
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::domain("omega", omega));
    }
    if !(x >= 0.0) {
        return Err(Error::domain("x", x));
    }
    let tot = omega - mu;
    let tail = if x.is_infinite() { 0.0 } else { libm::exp(2.0 * mu * x / (sigma * sigma)) };
    Ok(-mu / tot + omega / tot * (1.0 - tail))
}
