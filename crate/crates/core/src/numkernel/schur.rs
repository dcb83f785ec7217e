//! Complex Schur form with eigenvalue reordering, and a Bartels–Stewart
//! Sylvester solver built on it.

use alloc::vec::Vec;

use nalgebra::{Complex, ComplexField, DMatrix};

use crate::{Error, Matrix, Result};

pub(crate) type C64 = Complex<f64>;
pub(crate) type CMatrix = DMatrix<C64>;

/// `A = Z T Z^H` with `Z` unitary and `T` upper triangular.
pub(crate) struct ComplexSchur {
    pub z: CMatrix,
    pub t: CMatrix,
}

impl ComplexSchur {
    pub fn new(a: &Matrix) -> Result<Self> {
        let c = a.map(|x| C64::new(x, 0.0));
        let schur = nalgebra::linalg::Schur::try_new(c, f64::EPSILON, 100_000).ok_or(Error::Convergence {
            what: "Schur decomposition",
            iterations: 100_000,
            residual: f64::NAN,
        })?;
        let (z, mut t) = schur.unpack();
        let n = t.nrows();
        for j in 0..n {
            for i in j + 1..n {
                t[(i, j)] = C64::new(0.0, 0.0);
            }
        }
        Ok(Self { z, t })
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Swaps the diagonal entries at `k` and `k + 1` with a Givens rotation.
    fn swap(&mut self, k: usize) {
        let n = self.t.nrows();
        let a = self.t[(k, k)];
        let b = self.t[(k + 1, k + 1)];
        let c = self.t[(k, k + 1)];
        // First column of the rotation: eigenvector of the 2×2 leading block
        // belonging to `b`.
        let x1 = c;
        let x2 = b - a;
        let norm = libm::hypot(x1.modulus(), x2.modulus());
        if norm == 0.0 {
            return;
        }
        let (g11, g21) = (x1 / norm, x2 / norm);
        // G = [[g11, -conj(g21)], [g21, conj(g11)]]
        let g12 = -g21.conj();
        let g22 = g11.conj();
        for j in 0..n {
            let u = self.t[(k, j)];
            let v = self.t[(k + 1, j)];
            self.t[(k, j)] = g11.conj() * u + g21.conj() * v;
            self.t[(k + 1, j)] = g12.conj() * u + g22.conj() * v;
        }
        for i in 0..n {
            let u = self.t[(i, k)];
            let v = self.t[(i, k + 1)];
            self.t[(i, k)] = u * g11 + v * g21;
            self.t[(i, k + 1)] = u * g12 + v * g22;
            let u = self.z[(i, k)];
            let v = self.z[(i, k + 1)];
            self.z[(i, k)] = u * g11 + v * g21;
            self.z[(i, k + 1)] = u * g12 + v * g22;
        }
        self.t[(k + 1, k)] = C64::new(0.0, 0.0);
        self.t[(k, k)] = b;
        self.t[(k + 1, k + 1)] = a;
    }

    /// Moves every eigenvalue satisfying `select` to the leading block,
    /// preserving relative order. Returns the size of that block.
    pub fn reorder(&mut self, select: impl Fn(C64) -> bool) -> usize {
        let n = self.t.nrows();
        let mut front = 0;
        for k in 0..n {
            if select(self.t[(k, k)]) {
                let mut pos = k;
                while pos > front {
                    self.swap(pos - 1);
                    pos -= 1;
                }
                front += 1;
            }
        }
        front
    }
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<C64>> {
    Ok(ComplexSchur::new(a)?.eigenvalues())
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    Ok(eigenvalues(a)?.into_iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Solves the Sylvester equation `A X + X B = C` for real square `A`, `B`.
///
/// Requires `λ_i(A) + λ_j(B) ≠ 0` for all pairs.
pub fn solve_sylvester(a: &Matrix, b: &Matrix, c: &Matrix) -> Result<Matrix> {
    let sa = ComplexSchur::new(a)?;
    let sb = ComplexSchur::new(b)?;
    let cc = c.map(|x| C64::new(x, 0.0));
    // T_a Y + Y T_b = Z_a^H C Z_b with Y = Z_a^H X Z_b
    let rhs = sa.z.adjoint() * cc * &sb.z;
    let m = a.nrows();
    let n = b.nrows();
    let scale = sa.t.iter().chain(sb.t.iter()).map(|z| z.modulus()).fold(0.0, f64::max);
    let mut y = CMatrix::zeros(m, n);
    for k in 0..n {
        let mut col: Vec<C64> = (0..m).map(|i| rhs[(i, k)]).collect();
        for j in 0..k {
            let t = sb.t[(j, k)];
            for (i, ci) in col.iter_mut().enumerate() {
                *ci -= y[(i, j)] * t;
            }
        }
        let shift = sb.t[(k, k)];
        for i in (0..m).rev() {
            let mut s = col[i];
            for l in i + 1..m {
                s -= sa.t[(i, l)] * y[(l, k)];
            }
            let d = sa.t[(i, i)] + shift;
            if d.modulus() <= f64::EPSILON * scale.max(1.0) {
                return Err(Error::Singular { what: "Sylvester operator" });
            }
            y[(i, k)] = s / d;
        }
    }
    let x = &sa.z * y * sb.z.adjoint();
    Ok(x.map(|z| z.re))
}
