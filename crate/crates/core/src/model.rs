//! Model parameters and their validation: the free MMBM `(Q, μ, σ)` and the
//! two boundary specifications.

use alloc::format;
use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use crate::numkernel::{
    check_finite, check_generator, check_square, inverse, is_irreducible, stationary_row_vector, MatrixKind,
};
use crate::{Error, Matrix, Result, RowVector, Vector};

/// A validated Markov-modulated Brownian motion.
///
/// Holds the phase generator `Q`, drifts `μ` and volatilities `σ`, plus the
/// stationary phase distribution `α` and the mean drift `α μ`, which is
/// strictly negative.
#[derive(Debug, Clone, PartialEq)]
pub struct MmbmModel {
    q: Matrix,
    mu: Vector,
    sigma: Vector,
    alpha: RowVector,
    drift: f64,
}

impl MmbmModel {
    pub fn new(q: Matrix, mu: Vector, sigma: Vector) -> Result<Self> {
        check_square("Q", &q)?;
        let m = q.nrows();
        for (what, v) in [("mu", &mu), ("sigma", &sigma)] {
            if v.len() != m {
                return Err(Error::Shape { what: what.into(), expected: m, found: v.len() });
            }
        }
        check_finite("Q", q.as_slice())?;
        check_finite("mu", mu.as_slice())?;
        check_finite("sigma", sigma.as_slice())?;
        if let Some(i) = sigma.iter().position(|s| *s <= 0.0) {
            return Err(Error::NonPositiveVolatility { phase: i, sigma: sigma[i] });
        }
        check_generator("Q", &q, 0.0)?;
        if !is_irreducible(&q) {
            return Err(Error::Reducible { what: "Q".into() });
        }
        let alpha = stationary_row_vector(&q, MatrixKind::Generator)?;
        let drift = alpha.dot(&mu.transpose());
        if !(drift < 0.0) {
            return Err(Error::NonNegativeDrift { drift });
        }
        Ok(Self { q, mu, sigma, alpha, drift })
    }

    /// Number of phases `m`.
    pub fn phases(&self) -> usize {
        self.q.nrows()
    }

    pub fn generator(&self) -> &Matrix {
        &self.q
    }

    pub fn mu(&self) -> &Vector {
        &self.mu
    }

    pub fn sigma(&self) -> &Vector {
        &self.sigma
    }

    /// Stationary distribution of the phase process.
    pub fn alpha(&self) -> &RowVector {
        &self.alpha
    }

    /// `α μ`.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    /// `D = diag(μ)`.
    pub fn d(&self) -> Matrix {
        Matrix::from_diagonal(&self.mu)
    }

    /// `Θ = diag(σ)`.
    pub fn theta(&self) -> Matrix {
        Matrix::from_diagonal(&self.sigma)
    }

    pub fn theta_inv(&self) -> Matrix {
        Matrix::from_diagonal(&self.sigma.map(|s| 1.0 / s))
    }

    /// `max_i (μ_i/σ_i)²`: the flip-flop approximation needs `λ` strictly
    /// above this so that `μ_i + σ_i√λ > 0 > μ_i − σ_i√λ` for every phase.
    pub fn lambda_threshold(&self) -> f64 {
        self.mu.iter().zip(self.sigma.iter()).map(|(m, s)| (m / s) * (m / s)).fold(0.0, f64::max)
    }

    pub fn check_lambda(&self, lambda: f64) -> Result<()> {
        if !lambda.is_finite() {
            return Err(Error::domain("lambda", lambda));
        }
        let min = self.lambda_threshold();
        if !(lambda > min) {
            return Err(Error::LambdaTooSmall { lambda, min });
        }
        Ok(())
    }
}

/// Validates `(Q, μ, σ)`; identical to [`MmbmModel::new`].
pub fn validate_model(q: Matrix, mu: Vector, sigma: Vector) -> Result<MmbmModel> {
    MmbmModel::new(q, mu, sigma)
}

/// `α μ` of a validated model.
pub fn mean_drift(model: &MmbmModel) -> f64 {
    model.drift()
}

/// `α μ` for a raw irreducible generator, without the sign requirement.
pub fn stationary_drift(q: &Matrix, mu: &Vector) -> Result<f64> {
    if mu.len() != q.nrows() {
        return Err(Error::Shape { what: "mu".into(), expected: q.nrows(), found: mu.len() });
    }
    let alpha = stationary_row_vector(q, MatrixKind::Generator)?;
    Ok(alpha.dot(&mu.transpose()))
}

/// Sticky boundary: the phase-`i` process leaves level zero at rate
/// proportional to `a_i`; the stickiness is `ω_i = a_i σ_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct StickySpec {
    a: Vector,
}

impl StickySpec {
    pub fn new(a: Vector, m: usize) -> Result<Self> {
        if a.len() != m {
            return Err(Error::Shape { what: "a".into(), expected: m, found: a.len() });
        }
        check_finite("a", a.as_slice())?;
        if let Some(i) = a.iter().position(|x| *x <= 0.0) {
            return Err(Error::malformed("a", format!("entry {i} = {} must be strictly positive", a[i])));
        }
        Ok(Self { a })
    }

    /// Builds the spec from stickiness parameters, `a_i = ω_i/σ_i`.
    pub fn from_omega(omega: &Vector, sigma: &Vector) -> Result<Self> {
        if omega.len() != sigma.len() {
            return Err(Error::Shape { what: "omega".into(), expected: sigma.len(), found: omega.len() });
        }
        Self::new(omega.component_div(sigma), sigma.len())
    }

    pub fn a(&self) -> &Vector {
        &self.a
    }

    /// `A = diag(a)`.
    pub fn a_matrix(&self) -> Matrix {
        Matrix::from_diagonal(&self.a)
    }

    pub fn omega(&self, sigma: &Vector) -> Vector {
        self.a.component_mul(sigma)
    }
}

/// Sticky boundary with phase resampling on exit.
///
/// At level zero the phase moves at rates `√λ Ã + Q̃/√λ` and the process
/// leaves the boundary at rates `√λ A`, possibly changing phase. The exit
/// phase law is governed by `B = (−Ã)⁻¹A`, with stationary vector `β`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleSpec {
    a: Matrix,
    a_tilde: Matrix,
    q_tilde: Option<Matrix>,
    b: Matrix,
    beta: RowVector,
}

/// Validates `A`, `Ã` and the optional `Q̃`, caching `B` and `β`.
pub fn validate_resample(a: Matrix, a_tilde: Matrix, q_tilde: Option<Matrix>, m: usize) -> Result<ResampleSpec> {
    for (what, x) in [("A", &a), ("Atilde", &a_tilde)] {
        check_shape(what, x, m)?;
        check_finite(what, x.as_slice())?;
    }
    for ((i, j), x) in indexed(&a) {
        if x < 0.0 {
            return Err(Error::malformed("A", format!("entry ({i},{j}) = {x} is negative")));
        }
    }
    for ((i, j), x) in indexed(&a_tilde) {
        if i == j && !(x < 0.0) {
            return Err(Error::malformed("Atilde", format!("diagonal entry {i} = {x} must be negative")));
        }
        if i != j && x < 0.0 {
            return Err(Error::malformed("Atilde", format!("off-diagonal entry ({i},{j}) = {x} is negative")));
        }
    }
    let total = &a + &a_tilde;
    // A + Ã may have negative diagonal entries only; its row sums must vanish.
    check_generator("A + Atilde", &total, f64::INFINITY)?;
    if !is_irreducible(&total) {
        return Err(Error::Reducible { what: "A + Atilde".into() });
    }
    if let Some(qt) = &q_tilde {
        check_shape("Qtilde", qt, m)?;
        check_finite("Qtilde", qt.as_slice())?;
        check_q_tilde(qt, &a_tilde)?;
    }
    let b = inverse(&(-&a_tilde), "-Atilde")? * &a;
    let beta = stationary_row_vector(&b, MatrixKind::Stochastic).map_err(|e| match e {
        Error::Reducible { .. } => Error::Reducible { what: "B = (-Atilde)^-1 A".into() },
        other => other,
    })?;
    Ok(ResampleSpec { a, a_tilde, q_tilde, b, beta })
}

impl ResampleSpec {
    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn a_tilde(&self) -> &Matrix {
        &self.a_tilde
    }

    /// `Q̃` as given, or `None` when it defaults to `AQ`.
    pub fn q_tilde(&self) -> Option<&Matrix> {
        self.q_tilde.as_ref()
    }

    /// `B = (−Ã)⁻¹A`.
    pub fn b(&self) -> &Matrix {
        &self.b
    }

    /// Stationary vector of `B`.
    pub fn beta(&self) -> &RowVector {
        &self.beta
    }

    /// The effective `Q̃` for `model`: the configured one, else `AQ`.
    ///
    /// The default is checked with the same rules as a user-supplied `Q̃`,
    /// since for non-diagonal `A` the product can carry negative
    /// off-diagonal rates that `√λÃ` does not dominate.
    pub fn q_tilde_for(&self, model: &MmbmModel) -> Result<Matrix> {
        if model.phases() != self.a.nrows() {
            return Err(Error::Shape {
                what: "resampling spec".into(),
                expected: model.phases(),
                found: self.a.nrows(),
            });
        }
        match &self.q_tilde {
            Some(qt) => Ok(qt.clone()),
            None => {
                let qt = &self.a * model.generator();
                check_q_tilde(&qt, &self.a_tilde).map_err(|e| match e {
                    Error::Malformed { property, .. } => Error::malformed("Qtilde (default A Q)", property),
                    other => other,
                })?;
                Ok(qt)
            }
        }
    }
}

/// `Q̃` rows sum to zero, and wherever `Ã` has a zero off-diagonal entry
/// the rate `√λÃ_ij + Q̃_ij/√λ` is nonnegative for large `λ` only if
/// `Q̃_ij ≥ 0`.
fn check_q_tilde(qt: &Matrix, a_tilde: &Matrix) -> Result<()> {
    check_generator("Qtilde", qt, f64::INFINITY)?;
    for ((i, j), x) in indexed(qt) {
        if i != j && a_tilde[(i, j)] == 0.0 && x < 0.0 {
            return Err(Error::malformed(
                "Qtilde",
                format!("entry ({i},{j}) = {x} is negative where Atilde vanishes, so the boundary rate goes negative"),
            ));
        }
    }
    Ok(())
}

fn check_shape(what: &str, x: &Matrix, m: usize) -> Result<()> {
    check_square(what, x)?;
    if x.nrows() != m {
        return Err(Error::Shape { what: what.into(), expected: m, found: x.nrows() });
    }
    Ok(())
}

fn indexed(x: &Matrix) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
    let n = x.nrows();
    (0..n).flat_map(move |i| (0..x.ncols()).map(move |j| ((i, j), x[(i, j)])))
}

/// Behaviour of the process at level zero.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryVariant {
    /// Classical regulation: no time spent at zero.
    Standard,
    Sticky(StickySpec),
    Resampled(ResampleSpec),
}

impl BoundaryVariant {
    pub fn tag(&self) -> VariantTag {
        match self {
            BoundaryVariant::Standard => VariantTag::Standard,
            BoundaryVariant::Sticky(_) => VariantTag::Sticky,
            BoundaryVariant::Resampled(_) => VariantTag::Resampled,
        }
    }

    /// Checks that the spec, if any, has as many phases as `model`.
    pub fn check_against(&self, model: &MmbmModel) -> Result<()> {
        let m = model.phases();
        let found = match self {
            BoundaryVariant::Standard => return Ok(()),
            BoundaryVariant::Sticky(s) => s.a().len(),
            BoundaryVariant::Resampled(r) => r.a().nrows(),
        };
        if found != m {
            return Err(Error::Shape { what: format!("{} spec", self.tag()), expected: m, found });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariantTag {
    Standard,
    Sticky,
    Resampled,
}

impl VariantTag {
    pub const ALL: [VariantTag; 3] = [VariantTag::Standard, VariantTag::Sticky, VariantTag::Resampled];

    pub fn as_str(self) -> &'static str {
        match self {
            VariantTag::Standard => "standard",
            VariantTag::Sticky => "sticky",
            VariantTag::Resampled => "resampled",
        }
    }
}

impl fmt::Display for VariantTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariantTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(VariantTag::Standard),
            "sticky" => Ok(VariantTag::Sticky),
            "resampled" => Ok(VariantTag::Resampled),
            other => Err(Error::malformed(
                "variant",
                format!("unknown variant `{other}`; expected standard, sticky or resampled") as String,
            )),
        }
    }
}
