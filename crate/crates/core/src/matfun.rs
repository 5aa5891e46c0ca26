//! Matrix exponential and phi-functions.
//!
//! [`expm`] is scaling and squaring around a fixed degree-13 Padé
//! approximant. The phi-functions
//!
//! ```text
//! phi_0(A) = e^A,   phi_k(A) = sum_{j>=0} A^j / (j + k)!
//! ```
//!
//! come out of a single exponential of the block upper-triangular matrix
//!
//! ```text
//!     [ A  I  0  0 ]
//! M = [ 0  0  I  0 ]      expm(M) top block row = [ e^A  phi_1  phi_2  phi_3 ]
//!     [ 0  0  0  I ]
//!     [ 0  0  0  0 ]
//! ```
//!
//! so `A` is never inverted. That matters: the Robertson Jacobian is exactly
//! singular, and `(e^A - I) A^{-1}` style formulas cannot be evaluated there.

use thiserror::Error;

use crate::linalg::{lu_factor, Matrix};

/// Largest 1-norm for which the degree-13 Padé approximant is used unscaled.
pub const PADE13_THETA: f64 = 5.4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MatfunError {
    #[error("matrix exponential overflowed")]
    Overflow,
    #[error("matrix argument has non-finite entries")]
    NonFiniteInput,
}

const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Number of squarings used for a matrix of the given 1-norm.
pub fn squaring_count(norm_one: f64) -> u32 {
    if norm_one <= PADE13_THETA {
        0
    } else {
        (norm_one / PADE13_THETA).log2().ceil().max(0.0) as u32
    }
}

/// `e^A` by scaling and squaring with a degree-13 Padé approximant.
pub fn expm(a: &Matrix) -> Result<Matrix, MatfunError> {
    assert!(a.is_square(), "expm needs a square matrix");
    if !a.is_finite() {
        return Err(MatfunError::NonFiniteInput);
    }
    let s = squaring_count(a.norm_one());
    let scaled = a.scaled(0.5_f64.powi(s as i32));
    let mut e = pade13(&scaled)?;
    for _ in 0..s {
        e = e.matmul(&e);
        if !e.is_finite() {
            return Err(MatfunError::Overflow);
        }
    }
    if !e.is_finite() {
        return Err(MatfunError::Overflow);
    }
    Ok(e)
}

fn pade13(a: &Matrix) -> Result<Matrix, MatfunError> {
    let n = a.rows();
    let b = &PADE13;
    let ident = Matrix::identity(n);
    let a2 = a.matmul(a);
    let a4 = a2.matmul(&a2);
    let a6 = a4.matmul(&a2);

    let mut inner_u = a6.scaled(b[13]);
    inner_u.add_scaled(b[11], &a4);
    inner_u.add_scaled(b[9], &a2);
    let mut u = a6.matmul(&inner_u);
    u.add_scaled(b[7], &a6);
    u.add_scaled(b[5], &a4);
    u.add_scaled(b[3], &a2);
    u.add_scaled(b[1], &ident);
    let u = a.matmul(&u);

    let mut inner_v = a6.scaled(b[12]);
    inner_v.add_scaled(b[10], &a4);
    inner_v.add_scaled(b[8], &a2);
    let mut v = a6.matmul(&inner_v);
    v.add_scaled(b[6], &a6);
    v.add_scaled(b[4], &a4);
    v.add_scaled(b[2], &a2);
    v.add_scaled(b[0], &ident);

    let numer = &v + &u;
    let denom = &v - &u;
    let lu = lu_factor(&denom);
    // q(A) is well conditioned for ||A||_1 <= theta; a failed solve only
    // happens on garbage input, which we report as overflow.
    lu.solve_matrix(&numer).map_err(|_| MatfunError::Overflow)
}

/// `e^A` together with `phi_1`, `phi_2` and `phi_3` of the same argument.
#[derive(Debug, Clone, PartialEq)]
pub struct PhiBundle {
    pub exp: Matrix,
    pub phi1: Matrix,
    pub phi2: Matrix,
    pub phi3: Matrix,
}

impl PhiBundle {
    /// `phi_k` for `k = 0..=3`, with `phi_0 = exp`.
    pub fn phi(&self, k: usize) -> &Matrix {
        match k {
            0 => &self.exp,
            1 => &self.phi1,
            2 => &self.phi2,
            3 => &self.phi3,
            _ => panic!("phi bundle only holds phi_0..phi_3"),
        }
    }
}

/// `[e^A, phi_1(A), ..., phi_k(A)]` from one exponential of a
/// `(k+1)n x (k+1)n` augmented matrix. `k = 0` is plain [`expm`].
pub fn phi_functions(a: &Matrix, k: usize) -> Result<Vec<Matrix>, MatfunError> {
    assert!(a.is_square(), "phi functions need a square matrix");
    if k == 0 {
        return Ok(vec![expm(a)?]);
    }
    if !a.is_finite() {
        return Err(MatfunError::NonFiniteInput);
    }
    let n = a.rows();
    let size = (k + 1) * n;
    let mut m = Matrix::zeros(size, size);
    m.set_block(0, 0, a);
    for blk in 0..k {
        for i in 0..n {
            m[(blk * n + i, (blk + 1) * n + i)] = 1.0;
        }
    }
    let e = expm(&m)?;
    Ok((0..=k).map(|blk| e.block(0, blk * n, n, n)).collect())
}

/// All four matrix functions for `A`. Exact zeros and singular `A` are fine.
pub fn phi_bundle(a: &Matrix) -> Result<PhiBundle, MatfunError> {
    let mut phis = phi_functions(a, 3)?.into_iter();
    Ok(PhiBundle {
        exp: phis.next().unwrap(),
        phi1: phis.next().unwrap(),
        phi2: phis.next().unwrap(),
        phi3: phis.next().unwrap(),
    })
}
