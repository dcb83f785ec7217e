use alloc::format;
use alloc::string::String;

use crate::{Error, Matrix, Result, RowVector, Vector};

/// A validated square matrix: order at least one, every entry finite.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix(Matrix);

impl SquareMatrix {
    pub fn new(what: &str, m: Matrix) -> Result<Self> {
        check_square(what, &m)?;
        check_finite(what, m.as_slice())?;
        Ok(Self(m))
    }

    /// Builds from row-major nested rows, as they arrive from text configs.
    pub fn from_rows<R: AsRef<[f64]>>(what: &str, rows: &[R]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::Shape { what: what.into(), expected: 1, found: 0 });
        }
        for (i, r) in rows.iter().enumerate() {
            if r.as_ref().len() != n {
                return Err(Error::Shape { what: format!("{what} row {i}"), expected: n, found: r.as_ref().len() });
            }
        }
        Self::new(what, Matrix::from_fn(n, n, |i, j| rows[i].as_ref()[j]))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

pub(crate) fn check_square(what: &str, m: &Matrix) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::Shape { what: String::from(what), expected: m.nrows().max(1), found: m.ncols() });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, xs: &[f64]) -> Result<()> {
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { what: what.into() });
    }
    Ok(())
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| libm::fabs(*x)).sum::<f64>()).fold(0.0, f64::max)
}

pub(crate) fn ones(n: usize) -> Vector {
    Vector::from_element(n, 1.0)
}

/// Solves `A X = B`.
pub(crate) fn solve(a: &Matrix, b: &Matrix, what: &'static str) -> Result<Matrix> {
    let lu = a.clone().lu();
    let x = lu.solve(b).ok_or(Error::Singular { what })?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular { what });
    }
    Ok(x)
}

pub(crate) fn inverse(a: &Matrix, what: &'static str) -> Result<Matrix> {
    solve(a, &Matrix::identity(a.nrows(), a.nrows()), what)
}

/// Row vector `v` with `v M = 0` and `v 1 = 1`, without any sign or
/// structure checks on `M`.
pub(crate) fn left_null_vector(m: &Matrix, what: &'static str) -> Result<RowVector> {
    let n = m.nrows();
    let mut sys = m.transpose();
    for j in 0..n {
        sys[(n - 1, j)] = 1.0;
    }
    let mut rhs = Matrix::zeros(n, 1);
    rhs[(n - 1, 0)] = 1.0;
    let v = solve(&sys, &rhs, what)?;
    Ok(RowVector::from_iterator(n, v.iter().copied()))
}

/// Distance between the directions of two nonzero row vectors: the
/// Euclidean distance between `u/|u|` and `±v/|v|`, sign chosen to align
/// them. Zero iff the vectors are collinear; roughly the angle for small
/// values.
pub fn direction_distance(u: &RowVector, v: &RowVector) -> f64 {
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 || u.len() != v.len() {
        return f64::INFINITY;
    }
    let sign = if u.dot(v) < 0.0 { -1.0 } else { 1.0 };
    (u / nu - v * (sign / nv)).norm()
}
