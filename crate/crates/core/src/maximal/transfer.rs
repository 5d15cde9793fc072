use crate::calculus::{fractional_power_vec, KernelMode, MultiplierSpec, SpectralFactorization, Symbol};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{self, CMat};
use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Spacing of the alpha sweep.
const SWEEP_STEP: f64 = 0.05;
/// Random restarts of the p-norm power iteration.
const NORM_RESTARTS: usize = 6;
const NORM_ITERATIONS: usize = 60;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferNorms {
    pub p: f64,
    pub u_norm: f64,
    pub v_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub u_norm: f64,
    pub v_norm: f64,
}

/// `U = L_B^alpha L_A^{-alpha}` and `V = (U^{A*,B*}_alpha)^*` as dense
/// matrices, with estimated operator norms.
#[derive(Clone, Debug)]
pub struct TransferPlan {
    pub alpha: f64,
    pub a: SpectralFactorization,
    pub b: SpectralFactorization,
    pub u_matrix: CMat,
    pub v_matrix: CMat,
    pub norms: Vec<TransferNorms>,
    /// `L^2(M)` norms of `U` and `V` at `alpha k / n`, `k = 1..n`.
    pub sweep: Vec<SweepPoint>,
    /// Relative gap between the adjoint construction of `V` and `L_B^{-alpha} L_A^alpha`.
    pub v_route_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub alpha: f64,
    pub norms: Vec<TransferNorms>,
    pub sweep: Vec<SweepPoint>,
    pub sweep_sup_u: f64,
    pub sweep_sup_v: f64,
    pub v_route_gap: f64,
}

fn power_matrix(f_l: &SpectralFactorization, alpha: f64) -> Result<CMat> {
    f_l.multiplier_matrix(
        &MultiplierSpec::new(Symbol::Power { alpha: Complex64::new(alpha, 0.0) }, 1.0)?,
        KernelMode::Full,
    )
}

fn relative_gap(x: &CMat, y: &CMat) -> f64 {
    (x - y).norm_l2() / y.norm_l2().max(f64::MIN_POSITIVE)
}

pub(crate) fn transfer_matrices(a: &SpectralFactorization, b: &SpectralFactorization, alpha: f64) -> Result<(CMat, CMat, f64)> {
    let u = &power_matrix(b, alpha)? * &power_matrix(a, -alpha)?;
    let (a_star, b_star) = (a.adjoint(), b.adjoint());
    let u_star = &power_matrix(&a_star, alpha)? * &power_matrix(&b_star, -alpha)?;
    let v = linalg::weighted_adjoint(u_star.as_ref(), a.mass());
    let v_direct = &power_matrix(b, -alpha)? * &power_matrix(a, alpha)?;
    Ok((u, v.clone(), relative_gap(&v, &v_direct)))
}

/// Builds the transfer operators for `0 < alpha < 1/2` on kernel-free
/// operators sharing a grid, estimates their `L^p(M)` norms at each
/// `p_samples` entry and sweeps alpha over `(0, alpha]`.
pub fn build_transfer(
    a: &SpectralFactorization,
    b: &SpectralFactorization,
    alpha: f64,
    p_samples: &[f64],
) -> Result<TransferPlan> {
    if !(alpha > 0.0 && alpha < 0.5) {
        return Err(Error::Domain(format!("transfer needs 0 < alpha < 1/2, got {alpha}")));
    }
    a.check_same(b)?;
    if a.kernel_index().is_some() || b.kernel_index().is_some() {
        return Err(Error::Domain("transfer operators need kernel-free operators".into()));
    }
    let (u_matrix, v_matrix, v_route_gap) = transfer_matrices(a, b, alpha)?;
    let mass = a.mass();
    let norms = p_samples
        .iter()
        .map(|&p| {
            Ok(TransferNorms {
                p,
                u_norm: weighted_p_norm(&u_matrix, mass, p)?,
                v_norm: weighted_p_norm(&v_matrix, mass, p)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let steps = (alpha / SWEEP_STEP).ceil() as usize;
    let sweep = (1..=steps)
        .map(|k| {
            let al = alpha * k as f64 / steps as f64;
            let (u, v, _) = transfer_matrices(a, b, al)?;
            Ok(SweepPoint {
                alpha: al,
                u_norm: linalg::weighted_spectral_norm(u.as_ref(), mass)?,
                v_norm: linalg::weighted_spectral_norm(v.as_ref(), mass)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransferPlan {
        alpha,
        a: a.clone(),
        b: b.clone(),
        u_matrix,
        v_matrix,
        norms,
        sweep,
        v_route_gap,
    })
}

impl TransferPlan {
    pub fn summary(&self) -> TransferSummary {
        TransferSummary {
            alpha: self.alpha,
            norms: self.norms.clone(),
            sweep: self.sweep.clone(),
            sweep_sup_u: self.sweep.iter().map(|s| s.u_norm).fold(0.0, f64::max),
            sweep_sup_v: self.sweep.iter().map(|s| s.v_norm).fold(0.0, f64::max),
            v_route_gap: self.v_route_gap,
        }
    }

    /// `alpha`-th power of `A` (`B` when `on_b`) applied spectrally.
    pub fn power(&self, on_b: bool, alpha: f64, x: &[Complex64]) -> Result<Vec<Complex64>> {
        let f_l = if on_b { &self.b } else { &self.a };
        f_l.apply(
            &MultiplierSpec::new(Symbol::Power { alpha: Complex64::new(alpha, 0.0) }, 1.0)?,
            x,
            KernelMode::Full,
        )
    }

    /// Relative residuals of `U L_A^alpha f = L_B^alpha f`,
    /// `L_B^alpha (L_A^{-alpha} f) = U f` and `L_B^alpha V f = L_A^alpha f`.
    pub fn identity_residuals(&self, f: &GridFunction) -> Result<[f64; 3]> {
        let x = self.a.layout().restrict(f)?;
        let mass = self.a.mass();
        let rel = |p: &[Complex64], q: &[Complex64]| {
            let d: Vec<Complex64> = p.iter().zip(q).map(|(a, b)| a - b).collect();
            linalg::weighted_norm(&d, mass) / linalg::weighted_norm(q, mass).max(f64::MIN_POSITIVE)
        };
        let la = self.power(false, self.alpha, &x)?;
        let lb = self.power(true, self.alpha, &x)?;
        let u_la = linalg::matvec(self.u_matrix.as_ref(), &la);
        let r1 = rel(&u_la, &lb);
        let ux = linalg::matvec(self.u_matrix.as_ref(), &x);
        let lb_la_inv = self.power(true, self.alpha, &self.power(false, -self.alpha, &x)?)?;
        let r2 = rel(&lb_la_inv, &ux);
        let vx = linalg::matvec(self.v_matrix.as_ref(), &x);
        let r3 = rel(&self.power(true, self.alpha, &vx)?, &la);
        Ok([r1, r2, r3])
    }

    /// Largest relative gap between the spectral `L^{+-alpha} f` and the
    /// resolvent-quadrature construction, over both operators and signs.
    pub fn dual_path_residual(&self, f: &GridFunction) -> Result<f64> {
        let x = self.a.layout().restrict(f)?;
        let mass = self.a.mass();
        let mut worst: f64 = 0.0;
        for (on_b, f_l) in [(false, &self.a), (true, &self.b)] {
            for alpha in [self.alpha, -self.alpha] {
                let s = self.power(on_b, alpha, &x)?;
                let q = fractional_power_vec(f_l.matrix(), alpha, &x, 1e-11)?;
                let d: Vec<Complex64> = s.iter().zip(&q).map(|(a, b)| a - b).collect();
                worst = worst.max(linalg::weighted_norm(&d, mass) / linalg::weighted_norm(&q, mass));
            }
        }
        Ok(worst)
    }
}

/// `(sum_i m_i |x_i|^p)^{1/p}`; `p = inf` gives the maximum.
fn vec_p_norm(x: &[Complex64], mass: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        return x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    }
    x.iter().zip(mass).map(|(v, m)| m * v.norm().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// Estimate of the operator norm of `X` on `L^p(M)`.
///
/// Exact at `p = 1, 2, inf`. Otherwise a lower bound: the best of a
/// Boyd-Higham power iteration on `D X D^{-1}`, `D = M^{1/p}`, from several
/// deterministic random starts and the coordinate vectors.
pub fn weighted_p_norm(x: &CMat, mass: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    let n = x.nrows();
    if p == 2.0 {
        return linalg::weighted_spectral_norm(x.as_ref(), mass);
    }
    if p.is_infinite() {
        return Ok(linalg::norm_inf(x.as_ref()));
    }
    let d: Vec<f64> = mass.iter().map(|m| m.powf(1.0 / p)).collect();
    let scaled = Mat::from_fn(n, n, |i, j| x[(i, j)] * (d[i] / d[j]));
    if p == 1.0 {
        return Ok(linalg::norm_1(scaled.as_ref()));
    }
    let ones = vec![1.0; n];
    let q = p / (p - 1.0);
    let adj = scaled.adjoint().to_owned();
    let mut best: f64 = (0..n)
        .map(|j| vec_p_norm(&linalg::column(scaled.as_ref(), j), &ones, p))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..NORM_RESTARTS {
        let mut v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let nv = vec_p_norm(&v, &ones, p);
        v.iter_mut().for_each(|z| *z /= nv);
        for _ in 0..NORM_ITERATIONS {
            let y = linalg::matvec(scaled.as_ref(), &v);
            let ny = vec_p_norm(&y, &ones, p);
            best = best.max(ny);
            if ny == 0.0 {
                break;
            }
            let dual = duality_map(&y, p);
            let z = linalg::matvec(adj.as_ref(), &dual);
            let nz = vec_p_norm(&z, &ones, q);
            let pairing: f64 = z.iter().zip(&v).map(|(a, b)| (a.conj() * b).re).sum();
            if nz <= pairing * (1.0 + 1e-12) {
                break;
            }
            v = duality_map(&z, q);
        }
    }
    Ok(best)
}

/// Unit vector in `l^{p'}` norming `y`: `|y|^{p-1} sgn(y) / ||y||_p^{p-1}`.
fn duality_map(y: &[Complex64], p: f64) -> Vec<Complex64> {
    let ones = vec![1.0; y.len()];
    let ny = vec_p_norm(y, &ones, p);
    y.iter()
        .map(|v| {
            let r = v.norm();
            if r == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                v / r * (r / ny).powf(p - 1.0)
            }
        })
        .collect()
}
