//! Matrix exponential by scaling and squaring with diagonal Padé
//! approximants of degree 3, 5, 7, 9 or 13 (Higham, 2005).

use super::linalg::{check_finite, check_square, solve};
use crate::{Error, Matrix, Result};

const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.53939833006323e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA_13: f64 = 5.371920351148152;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(m: &Matrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|x| libm::fabs(*x)).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^{M t}` for `t >= 0`.
pub fn matrix_exponential(m: &Matrix, t: f64) -> Result<Matrix> {
    check_square("matrix exponential argument", m)?;
    check_finite("matrix exponential argument", m.as_slice())?;
    if !t.is_finite() || t < 0.0 {
        return Err(Error::domain("matrix exponential time t", t));
    }
    let n = m.nrows();
    if t == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    let a = m * t;
    let norm = one_norm(&a);
    for &(degree, theta) in &THETA {
        if norm <= theta {
            return pade_low(&a, degree);
        }
    }
    let s = if norm > THETA_13 { libm::ceil(libm::log2(norm / THETA_13)) as i32 } else { 0 };
    let scaled = &a * libm::ldexp(1.0, -s);
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

fn pade_low(a: &Matrix, degree: usize) -> Result<Matrix> {
    let b: &[f64] = match degree {
        3 => &B3,
        5 => &B5,
        7 => &B7,
        _ => &B9,
    };
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    // even powers I, A², A⁴, ...
    let mut pow = id.clone();
    let mut odd = Matrix::zeros(n, n);
    let mut even = Matrix::zeros(n, n);
    for k in 0..=degree / 2 {
        even += &pow * b[2 * k];
        odd += &pow * b[2 * k + 1];
        pow = &pow * &a2;
    }
    let u = a * odd;
    finish(&even, &u)
}

fn pade13(a: &Matrix) -> Result<Matrix> {
    let b = &B13;
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    finish(&v, &u)
}

fn finish(v: &Matrix, u: &Matrix) -> Result<Matrix> {
    solve(&(v - u), &(v + u), "Pade denominator")
}
