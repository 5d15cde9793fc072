//! Dense complex linear algebra helpers on top of `faer`.
//!
//! Everything here works with plain Euclidean coordinates. Operators that act
//! on grid functions are self-adjoint or contractive with respect to the
//! mass-weighted inner product `<u, v>_M = sum_j m_j u_j conj(v_j)`, so the
//! `weighted_*` helpers conjugate by `M^{1/2}` before measuring.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::{Mat, MatRef};
use num_complex::Complex64;

pub type CMat = Mat<Complex64>;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
#[cfg(test)]
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub fn matvec(a: MatRef<'_, Complex64>, x: &[Complex64]) -> Vec<Complex64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![ZERO; a.nrows()];
    for j in 0..a.ncols() {
        let xj = x[j];
        if xj == ZERO {
            continue;
        }
        let col = a.col(j);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += col[i] * xj;
        }
    }
    y
}

pub fn to_column(x: &[Complex64]) -> Mat<Complex64> {
    Mat::from_fn(x.len(), 1, |i, _| x[i])
}

pub fn column(a: MatRef<'_, Complex64>, j: usize) -> Vec<Complex64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

/// Largest singular value.
pub fn spectral_norm(a: MatRef<'_, Complex64>) -> Result<f64> {
    let sv = a
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("singular values: {e:?}")))?;
    Ok(sv.iter().cloned().fold(0.0, f64::max))
}

/// Ratio of extreme singular values.
pub fn condition_number(a: MatRef<'_, Complex64>) -> Result<f64> {
    let sv = a
        .singular_values()
        .map_err(|e| Error::Decomposition(format!("singular values: {e:?}")))?;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(if min > 0.0 { max / min } else { f64::INFINITY })
}

/// `M^{1/2} A M^{-1/2}`: the Euclidean representative of an operator on
/// `L^2(M)`.
pub fn symmetrize(a: MatRef<'_, Complex64>, mass: &[f64]) -> CMat {
    let sq: Vec<f64> = mass.iter().map(|m| m.sqrt()).collect();
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * (sq[i] / sq[j]))
}

/// Operator norm on `L^2(M)`.
pub fn weighted_spectral_norm(a: MatRef<'_, Complex64>, mass: &[f64]) -> Result<f64> {
    spectral_norm(symmetrize(a, mass).as_ref())
}

/// Adjoint with respect to `<., .>_M`: `M^{-1} A^H M`.
pub fn weighted_adjoint(a: MatRef<'_, Complex64>, mass: &[f64]) -> CMat {
    Mat::from_fn(a.ncols(), a.nrows(), |i, j| a[(j, i)].conj() * (mass[j] / mass[i]))
}

pub fn weighted_norm(x: &[Complex64], mass: &[f64]) -> f64 {
    x.iter()
        .zip(mass)
        .map(|(v, m)| m * v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

pub fn weighted_inner(x: &[Complex64], y: &[Complex64], mass: &[f64]) -> Complex64 {
    x.iter()
        .zip(y)
        .zip(mass)
        .map(|((a, b), m)| a * b.conj() * *m)
        .sum()
}

pub fn norm_1(a: MatRef<'_, Complex64>) -> f64 {
    (0..a.ncols())
        .map(|j| (0..a.nrows()).map(|i| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn norm_inf(a: MatRef<'_, Complex64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn frobenius(a: MatRef<'_, Complex64>) -> f64 {
    a.norm_l2()
}

pub fn inverse(a: MatRef<'_, Complex64>) -> CMat {
    let n = a.nrows();
    a.partial_piv_lu().solve(Mat::<Complex64>::identity(n, n))
}

pub fn scaled(a: MatRef<'_, Complex64>, s: Complex64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

// Pade(13) coefficients and the theta_13 threshold for scaling and squaring.
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
const THETA13: f64 = 5.371_920_351_148_152;

fn lincomb(terms: &[(f64, &CMat)], n: usize) -> CMat {
    let mut out = Mat::<Complex64>::zeros(n, n);
    for &(c, m) in terms {
        for j in 0..n {
            for i in 0..n {
                out[(i, j)] += m[(i, j)] * c;
            }
        }
    }
    out
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. Works on the matrix itself, never on an eigenbasis.
pub fn expm(a: MatRef<'_, Complex64>) -> CMat {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return Mat::zeros(0, 0);
    }
    let norm = norm_1(a);
    let squarings = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let s = Complex64::new(0.5f64.powi(squarings), 0.0);
    let a1 = scaled(a, s);
    let ident = Mat::<Complex64>::identity(n, n);
    let a2 = &a1 * &a1;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let inner_u = lincomb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let outer_u = lincomb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2), (b[1], &ident)], n);
    let u = &a1 * &(&(&a6 * &inner_u) + &outer_u);

    let inner_v = lincomb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let outer_v = lincomb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2), (b[0], &ident)], n);
    let v = &(&a6 * &inner_v) + &outer_v;

    let numer = &v + &u;
    let denom = &v - &u;
    let mut r = denom.partial_piv_lu().solve(&numer);
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}
