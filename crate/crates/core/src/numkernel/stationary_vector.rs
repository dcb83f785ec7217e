use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{check_finite, check_square, left_null_vector};
use crate::{Error, Matrix, Result, RowVector};

/// Row-sum tolerance for generator and stochastic-matrix checks.
pub(crate) const ROW_SUM_TOL: f64 = 1e-10;
/// Slack allowed on sign constraints for computed (not user-typed) matrices.
pub(crate) const SIGN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    /// Off-diagonals nonnegative, rows sum to zero.
    Generator,
    /// Entries in `[0, 1]`, rows sum to one.
    Stochastic,
}

/// Irreducibility of the off-diagonal sparsity pattern, decided by forward
/// and backward reachability from state 0.
pub fn is_irreducible(m: &Matrix) -> bool {
    let n = m.nrows();
    if n <= 1 {
        return true;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack: Vec<usize> = vec![0];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if forward { m[(i, j)] } else { m[(j, i)] };
                if i != j && w > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

pub(crate) fn check_generator(what: &str, g: &Matrix, sign_tol: f64) -> Result<()> {
    check_square(what, g)?;
    check_finite(what, g.as_slice())?;
    let n = g.nrows();
    for i in 0..n {
        for j in 0..n {
            if i != j && g[(i, j)] < -sign_tol {
                return Err(Error::malformed(
                    what,
                    format!("off-diagonal entry ({i},{j}) = {} is negative", g[(i, j)]),
                ));
            }
        }
        let s: f64 = g.row(i).sum();
        if libm::fabs(s) > ROW_SUM_TOL {
            return Err(Error::malformed(what, format!("row {i} sums to {s}, not 0")));
        }
    }
    Ok(())
}

fn check_stochastic(what: &str, p: &Matrix) -> Result<()> {
    check_square(what, p)?;
    check_finite(what, p.as_slice())?;
    let n = p.nrows();
    for i in 0..n {
        for j in 0..n {
            let x = p[(i, j)];
            if !(-SIGN_TOL..=1.0 + SIGN_TOL).contains(&x) {
                return Err(Error::malformed(what, format!("entry ({i},{j}) = {x} is outside [0, 1]")));
            }
        }
        let s: f64 = p.row(i).sum();
        if libm::fabs(s - 1.0) > ROW_SUM_TOL {
            return Err(Error::malformed(what, format!("row {i} sums to {s}, not 1")));
        }
    }
    Ok(())
}

/// Stationary probability row vector of an irreducible generator
/// (`v G = 0`) or stochastic matrix (`v P = v`), normalised to `v 1 = 1`.
///
/// A stochastic matrix `P` goes through the generator path as `P - I`.
pub fn stationary_row_vector(g: &Matrix, kind: MatrixKind) -> Result<RowVector> {
    let generator = match kind {
        MatrixKind::Generator => {
            check_generator("generator", g, SIGN_TOL)?;
            g.clone()
        }
        MatrixKind::Stochastic => {
            check_stochastic("stochastic matrix", g)?;
            g - Matrix::identity(g.nrows(), g.nrows())
        }
    };
    let what = match kind {
        MatrixKind::Generator => "generator",
        MatrixKind::Stochastic => "stochastic matrix",
    };
    if !is_irreducible(&generator) {
        return Err(Error::Reducible { what: what.into() });
    }
    left_null_vector(&generator, "stationary vector system")
}
