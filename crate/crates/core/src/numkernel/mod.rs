//! Dense linear-algebra kernels: stationary vectors, the matrix
//! exponential, the stable solvent `U(q)` of the quadratic matrix equation,
//! and the first-return matrices `Ψ_λ(q)` of the flip-flop fluid queue.

mod expm;
mod linalg;
mod quadratic;
mod riccati;
mod schur;
mod stationary_vector;

pub use expm::matrix_exponential;
pub use linalg::{direction_distance, inf_norm, SquareMatrix};
pub use quadratic::{quadratic_residual, solve_stable_quadratic, QuadraticSolution, SUBSPACE_BAND};
pub use riccati::{riccati_residual, solve_riccati_psi, RiccatiSolution};
pub use schur::{eigenvalues, solve_sylvester, spectral_abscissa};
pub use stationary_vector::{is_irreducible, stationary_row_vector, MatrixKind};

pub(crate) use linalg::{check_finite, check_square, inverse, left_null_vector, ones};
pub(crate) use stationary_vector::check_generator;
