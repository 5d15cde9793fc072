//! Ellipticity constants of a complex coefficient matrix.
//!
//! With `mu = |1 - 2/p|`, the p-ellipticity functional is
//! `Re <A xi, xi> + mu Re <A xi, conj(xi)>` over unit `xi`. Writing
//! `xi = u + i v` and `A = P + i Q` it becomes the real quadratic form
//!
//! ```text
//! [u]^T [ (1+mu) P   -(1+mu) Q ] [u]
//! [v]   [ (1-mu) Q    (1-mu) P ] [v]
//! ```
//!
//! so its minimum on the sphere is the smallest eigenvalue of the symmetric
//! part of that block matrix. `mu = 0` gives the usual ellipticity constant.

use crate::error::{Error, Result};
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

type Pairs = Vec<Vec<[f64; 2]>>;

/// Square complex matrix stored row-major.
///
/// Serializes as a list of rows, each entry an `[re, im]` pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Pairs", into = "Pairs")]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl TryFrom<Pairs> for ComplexMatrix {
    type Error = Error;

    fn try_from(rows: Pairs) -> Result<Self> {
        let d = rows.len();
        let mut entries = Vec::with_capacity(d * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            entries.extend(row.iter().map(|&[re, im]| Complex64::new(re, im)));
        }
        ComplexMatrix::from_row_major(d, entries)
    }
}

impl From<ComplexMatrix> for Pairs {
    fn from(m: ComplexMatrix) -> Pairs {
        (0..m.dim)
            .map(|i| (0..m.dim).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
            .collect()
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.entries[i * self.dim + j]
    }
}

impl ComplexMatrix {
    pub fn from_row_major(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Dimension("matrix dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Dimension(format!(
                "{} entries do not form a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Domain("matrix entries must be finite".into()));
        }
        Ok(ComplexMatrix { dim, entries })
    }

    pub fn from_real(dim: usize, entries: &[f64]) -> Result<Self> {
        Self::from_row_major(dim, entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let entries = (0..dim * dim).map(|k| f(k / dim, k % dim)).collect();
        ComplexMatrix { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    /// Entries drawn independently from the standard complex normal law.
    pub fn random_gaussian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let entries = (0..dim * dim)
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
            })
            .collect();
        ComplexMatrix { dim, entries }
    }

    /// `I + s G` with `G` Gaussian and `s` chosen so that the Hermitian part
    /// stays at least `floor` away from singular.
    pub fn random_elliptic<R: Rng + ?Sized>(dim: usize, floor: f64, rng: &mut R) -> Self {
        loop {
            let g = Self::random_gaussian(dim, rng);
            let scale = rng.random_range(0.3..1.2);
            let a = Self::identity(dim).add(&g.scale(Complex64::new(scale, 0.0)));
            if lambda_of(&a).map(|l| l >= floor).unwrap_or(false) {
                return a;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn scale(&self, c: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|z| z * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn is_real(&self) -> bool {
        self.entries.iter().all(|z| z.im == 0.0)
    }

    pub fn to_faer(&self) -> Mat<Complex64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self[(i, j)])
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }
}

/// `mu = |1 - 2/p|`.
pub fn mu_of(p: f64) -> Result<f64> {
    if !(p > 1.0) || p.is_nan() {
        return Err(Error::Domain(format!("p must lie in (1, inf], got {p}")));
    }
    Ok(if p.is_infinite() { 1.0 } else { (1.0 - 2.0 / p).abs() })
}

/// Conjugate exponent `p / (p - 1)`.
pub fn conjugate_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        1.0
    } else if p == 1.0 {
        f64::INFINITY
    } else {
        p / (p - 1.0)
    }
}

fn real_form(a: &ComplexMatrix, mu: f64) -> Mat<f64> {
    let d = a.dim;
    let mut k = Mat::<f64>::zeros(2 * d, 2 * d);
    for i in 0..d {
        for j in 0..d {
            let (p, q) = (a[(i, j)].re, a[(i, j)].im);
            k[(i, j)] = (1.0 + mu) * p;
            k[(i, d + j)] = -(1.0 + mu) * q;
            k[(d + i, j)] = (1.0 - mu) * q;
            k[(d + i, d + j)] = (1.0 - mu) * p;
        }
    }
    Mat::from_fn(2 * d, 2 * d, |i, j| 0.5 * (k[(i, j)] + k[(j, i)]))
}

fn min_eigenvalue(s: &Mat<f64>) -> Result<f64> {
    let ev = s
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("symmetric eigenvalues: {e:?}")))?;
    Ok(ev.into_iter().fold(f64::INFINITY, f64::min))
}

/// The p-ellipticity functional for a given `mu in [0, 1]`.
pub fn delta_mu(a: &ComplexMatrix, mu: f64) -> Result<f64> {
    min_eigenvalue(&real_form(a, mu))
}

/// Largest `lambda` with `Re <A xi, xi> >= lambda |xi|^2`.
pub fn lambda_of(a: &ComplexMatrix) -> Result<f64> {
    delta_mu(a, 0.0)
}

/// Operator norm of `A`, the smallest admissible boundedness constant.
pub fn capital_lambda_of(a: &ComplexMatrix) -> Result<f64> {
    crate::linalg::spectral_norm(a.to_faer().as_ref())
}

pub fn delta_p(a: &ComplexMatrix, p: f64) -> Result<f64> {
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::Domain(format!("p must lie in (1, inf), got {p}")));
    }
    delta_mu(a, mu_of(p)?)
}

/// Open interval `(p_min, p_max)` of exponents with positive `delta_p`.
/// `p_max` is infinite when the matrix is p-elliptic for every p.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PRange {
    pub p_min: f64,
    #[serde(with = "infinite_as_null")]
    pub p_max: f64,
    /// Critical value of `|1 - 2/p|`.
    pub mu_star: f64,
}

impl PRange {
    pub fn contains(&self, p: f64) -> bool {
        p > self.p_min && p < self.p_max
    }

    fn from_mu(mu_star: f64) -> PRange {
        if mu_star >= 1.0 {
            PRange { p_min: 1.0, p_max: f64::INFINITY, mu_star: 1.0 }
        } else {
            PRange {
                p_min: 2.0 / (1.0 + mu_star),
                p_max: 2.0 / (1.0 - mu_star),
                mu_star,
            }
        }
    }

    /// Intersection of two ranges.
    pub fn intersect(&self, other: &PRange) -> PRange {
        PRange::from_mu(self.mu_star.min(other.mu_star))
    }
}

pub(crate) mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// Bisection for the largest `mu` with positive functional. The map
/// `mu -> delta_mu` is a minimum of affine functions, hence concave, and it
/// is positive at 0, so its positivity set is an interval.
pub fn p_ellipticity_range(a: &ComplexMatrix, tol: f64) -> Result<PRange> {
    let lambda = lambda_of(a)?;
    if lambda <= 0.0 {
        return Err(Error::NotElliptic { lambda });
    }
    let scale = capital_lambda_of(a)?.max(f64::MIN_POSITIVE);
    // At mu = 1 the form is singular for real matrices; treat round-off
    // there as zero.
    if delta_mu(a, 1.0)? >= -1e-12 * scale {
        return Ok(PRange::from_mu(1.0));
    }
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let tol = tol.max(1e-15);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if delta_mu(a, mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(PRange::from_mu(0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticityReport {
    pub lambda: f64,
    pub capital_lambda: f64,
    /// `(p, delta_p)` pairs in the order requested.
    pub delta_p: Vec<(f64, f64)>,
    pub p_range: Option<PRange>,
}

pub fn ellipticity_report(a: &ComplexMatrix, p_samples: &[f64]) -> Result<EllipticityReport> {
    let lambda = lambda_of(a)?;
    let delta_p = p_samples
        .iter()
        .map(|&p| delta_p(a, p).map(|d| (p, d)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EllipticityReport {
        lambda,
        capital_lambda: capital_lambda_of(a)?,
        delta_p,
        p_range: if lambda > 0.0 { Some(p_ellipticity_range(a, 1e-8)?) } else { None },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevExponents {
    pub d: usize,
    pub p: f64,
    pub two_star: f64,
    pub p_upper: f64,
    pub p_lower: f64,
}

pub fn sobolev_exponents(d: usize, p: f64) -> Result<SobolevExponents> {
    if d < 3 {
        return Err(Error::Domain(format!("dimension must be at least 3, got {d}")));
    }
    if !(p >= 2.0) || !p.is_finite() {
        return Err(Error::Domain(format!("p must be finite and at least 2, got {p}")));
    }
    let df = d as f64;
    let p_upper = p * df / (df - 2.0);
    Ok(SobolevExponents {
        d,
        p,
        two_star: 2.0 * df / (df - 2.0),
        p_upper,
        p_lower: p_upper / (p_upper - 1.0),
    })
}

/// Sampling estimate of the p-ellipticity functional for several `mu` at
/// once, refined by projected gradient descent on the complex unit sphere
/// from the best samples. Works with the complex form directly, independently
/// of the real block reduction.
pub fn sampled_delta_mu<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    mus: &[f64],
    samples: usize,
    refine_steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let d = a.dim;
    let mut best: Vec<(f64, Vec<Complex64>)> = vec![(f64::INFINITY, vec![]); mus.len()];
    let mut xi = vec![Complex64::new(0.0, 0.0); d];
    for _ in 0..samples {
        let mut norm = 0.0;
        for z in xi.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *z = Complex64::new(re, im);
            norm += z.norm_sqr();
        }
        let inv = norm.sqrt().recip();
        xi.iter_mut().for_each(|z| *z *= inv);
        let (h, s) = forms(a, &xi);
        for (k, &mu) in mus.iter().enumerate() {
            let q = h.re + mu * s.re;
            if q < best[k].0 {
                best[k] = (q, xi.clone());
            }
        }
    }
    mus.iter()
        .zip(best)
        .map(|(&mu, (q, x))| refine_on_sphere(a, mu, x, refine_steps).min(q))
        .collect()
}

/// `(<A xi, xi>, <A xi, conj xi>)`.
fn forms(a: &ComplexMatrix, xi: &[Complex64]) -> (Complex64, Complex64) {
    let ax = a.apply(xi);
    let h = ax.iter().zip(xi).map(|(y, x)| y * x.conj()).sum();
    let s = ax.iter().zip(xi).map(|(y, x)| y * x).sum();
    (h, s)
}

fn refine_on_sphere(a: &ComplexMatrix, mu: f64, mut xi: Vec<Complex64>, steps: usize) -> f64 {
    let d = a.dim;
    let objective = |x: &[Complex64]| {
        let (h, s) = forms(a, x);
        h.re + mu * s.re
    };
    let bound: f64 = a.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let step = 0.5 / ((1.0 + mu) * bound.max(1e-300));
    let mut value = objective(&xi);
    let ah = a.adjoint();
    let at = ComplexMatrix::from_fn(d, |i, j| a[(j, i)]);
    for _ in 0..steps {
        // Wirtinger gradient: (A + A^H) xi + mu conj((A + A^T) xi)
        let g1 = a.add(&ah).apply(&xi);
        let g2 = a.add(&at).apply(&xi);
        let g: Vec<Complex64> = g1.iter().zip(&g2).map(|(x, y)| x + mu * y.conj()).collect();
        let radial: f64 = g.iter().zip(&xi).map(|(gi, xi)| (gi * xi.conj()).re).sum();
        let mut next: Vec<Complex64> = xi
            .iter()
            .zip(&g)
            .map(|(x, gi)| x - step * (gi - radial * x))
            .collect();
        let n = next.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        next.iter_mut().for_each(|z| *z /= n);
        let v = objective(&next);
        if v > value - 1e-17 {
            if v < value {
                value = v;
            }
            break;
        }
        value = v;
        xi = next;
    }
    value
}

/// Sampling estimate of `sup |<A xi, eta>|` over unit pairs, refined by
/// alternating maximization from the best pair.
pub fn sampled_capital_lambda<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    samples: usize,
    refine_steps: usize,
    rng: &mut R,
) -> f64 {
    let d = a.dim;
    let unit = |rng: &mut R| -> Vec<Complex64> {
        let v: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v.into_iter().map(|z| z / n).collect()
    };
    let mut best = (0.0, vec![]);
    for _ in 0..samples {
        let xi = unit(rng);
        let eta = unit(rng);
        let v: Complex64 = a.apply(&xi).iter().zip(&eta).map(|(x, y)| x * y.conj()).sum();
        if v.norm() > best.0 {
            best = (v.norm(), xi);
        }
    }
    let (mut value, mut xi) = best;
    let ah = a.adjoint();
    for _ in 0..refine_steps {
        let y = a.apply(&xi);
        let ny = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if ny == 0.0 {
            break;
        }
        value = value.max(ny);
        let eta: Vec<Complex64> = y.iter().map(|z| z / ny).collect();
        let z = ah.apply(&eta);
        let nz = z.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        xi = z.into_iter().map(|w| w / nz).collect();
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, PI};

    fn rotation(theta: f64, d: usize) -> ComplexMatrix {
        ComplexMatrix::identity(d).scale(Complex64::from_polar(1.0, theta))
    }

    #[test]
    fn identity_and_rotation() {
        assert_relative_eq!(lambda_of(&ComplexMatrix::identity(2)).unwrap(), 1.0, epsilon = 1e-14);
        assert_relative_eq!(lambda_of(&rotation(FRAC_PI_3, 2)).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(capital_lambda_of(&ComplexMatrix::identity(3)).unwrap(), 1.0, epsilon = 1e-14);
        let diag = ComplexMatrix::from_row_major(
            2,
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 5.0)],
        )
        .unwrap();
        assert_relative_eq!(capital_lambda_of(&diag).unwrap(), 5.0, epsilon = 1e-13);
    }

    #[test]
    fn delta_of_identity() {
        for &p in &[1.1f64, 1.5, 2.0, 3.0, 10.0] {
            let mu = (1.0 - 2.0 / p).abs();
            assert_relative_eq!(delta_p(&ComplexMatrix::identity(3), p).unwrap(), 1.0 - mu, epsilon = 1e-14);
        }
        assert!(delta_p(&ComplexMatrix::identity(2), 1.0).is_err());
        assert!(delta_p(&ComplexMatrix::identity(2), 0.5).is_err());
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(ComplexMatrix::from_row_major(2, vec![Complex64::new(1.0, 0.0); 3]).is_err());
        let json = "[[[1,0],[0,0]],[[0,0]]]";
        assert!(serde_json::from_str::<ComplexMatrix>(json).is_err());
    }

    #[test]
    fn serde_roundtrip() {
        let a = rotation(0.3, 2);
        let s = serde_json::to_string(&a).unwrap();
        let b: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotation_range_matches_scan() {
        let a = rotation(FRAC_PI_4, 2);
        let r = p_ellipticity_range(&a, 1e-10).unwrap();
        // dense scan of the sign change
        let mut last_positive = 0.0;
        let mut mu = 0.0;
        while mu < 1.0 {
            if delta_mu(&a, mu).unwrap() > 0.0 {
                last_positive = mu;
            }
            mu += 1e-4;
        }
        assert!((r.mu_star - last_positive).abs() <= 1e-4 + 1e-10);
        assert_relative_eq!(r.mu_star, FRAC_PI_4.cos(), epsilon = 1e-9);
        assert_relative_eq!(r.p_min * r.p_max / (r.p_min + r.p_max), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn real_matrices_are_p_elliptic_for_all_p() {
        let b = ComplexMatrix::from_real(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
        let r = p_ellipticity_range(&b, 1e-8).unwrap();
        assert_eq!(r.p_min, 1.0);
        assert!(r.p_max.is_infinite());
        assert_eq!(serde_json::to_value(r).unwrap()["p_max"], serde_json::Value::Null);
        let r = p_ellipticity_range(&ComplexMatrix::identity(2), 1e-8).unwrap();
        assert!(r.p_max.is_infinite());
    }

    #[test]
    fn non_elliptic_is_rejected() {
        let a = rotation(0.6 * PI, 2);
        assert!(matches!(p_ellipticity_range(&a, 1e-8), Err(Error::NotElliptic { .. })));
    }

    #[test]
    fn sobolev_arithmetic() {
        let s = sobolev_exponents(3, 2.0).unwrap();
        assert_relative_eq!(s.two_star, 6.0);
        assert_relative_eq!(s.p_upper, 6.0);
        assert_relative_eq!(s.p_lower, 1.2);
        assert_relative_eq!(sobolev_exponents(4, 2.0).unwrap().two_star, 4.0);
        let s = sobolev_exponents(3, 4.0).unwrap();
        assert_relative_eq!(s.p_upper, 12.0);
        assert_relative_eq!(s.p_lower, 12.0 / 11.0);
        assert!(sobolev_exponents(2, 2.0).is_err());
    }

    #[test]
    fn sampling_oracle_agrees_with_reduction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = ComplexMatrix::random_gaussian(2, &mut rng);
        let mus = [0.0, 0.5];
        let sampled = sampled_delta_mu(&a, &mus, 200_000, 5000, &mut rng);
        for (mu, s) in mus.iter().zip(sampled) {
            assert!((s - delta_mu(&a, *mu).unwrap()).abs() < 1e-6);
        }
        let cl = sampled_capital_lambda(&a, 100_000, 200, &mut rng);
        assert!((cl - capital_lambda_of(&a).unwrap()).abs() < 1e-4);
    }

    fn matrix_strategy() -> impl Strategy<Value = ComplexMatrix> {
        (2usize..=4, any::<u64>()).prop_map(|(d, seed)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ComplexMatrix::random_elliptic(d, 0.05, &mut rng)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn conjugate_exponents_agree(a in matrix_strategy(), p in 1.05f64..20.0) {
            let q = conjugate_exponent(p);
            prop_assert!((delta_p(&a, p).unwrap() - delta_p(&a, q).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn two_is_lambda(a in matrix_strategy()) {
            prop_assert_eq!(delta_p(&a, 2.0).unwrap(), lambda_of(&a).unwrap());
        }

        // The values differ in general (random 2x2 matrices give gaps of
        // order 0.1 near p = 1), only the sign is shared.
        #[test]
        fn adjoint_has_same_sign(a in matrix_strategy(), p in 1.05f64..20.0) {
            let lhs = delta_p(&a, p).unwrap();
            let rhs = delta_p(&a.adjoint(), p).unwrap();
            prop_assert!(lhs.abs() < 1e-12 || rhs.abs() < 1e-12 || (lhs > 0.0) == (rhs > 0.0), "{} vs {}", lhs, rhs);
        }

        #[test]
        fn nonincreasing_above_two(a in matrix_strategy(), p in 2.0f64..30.0, dp in 0.0f64..10.0) {
            prop_assert!(delta_p(&a, p + dp).unwrap() <= delta_p(&a, p).unwrap() + 1e-12);
        }

        #[test]
        fn lambda_at_most_capital_lambda(a in matrix_strategy()) {
            prop_assert!(lambda_of(&a).unwrap() <= capital_lambda_of(&a).unwrap() + 1e-12);
        }
    }
}
