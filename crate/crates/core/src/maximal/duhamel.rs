use super::transfer::TransferPlan;
use crate::calculus::SpectralFactorization;
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{self, CMat, ZERO};
use crate::quadrature::{gauss_jacobi, graded_legendre, QuadratureRule};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// `s^{alpha-1} (t-s)^{-alpha}` on `[0, t]`, or `(w+s)^{alpha-1} (t-s)^{-alpha}`
/// when shifted by `w > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaMeasure {
    pub alpha: f64,
    pub t: f64,
    pub w: f64,
}

impl BetaMeasure {
    pub fn new(alpha: f64, t: f64) -> Result<BetaMeasure> {
        BetaMeasure::shifted(alpha, t, 0.0)
    }

    pub fn shifted(alpha: f64, t: f64, w: f64) -> Result<BetaMeasure> {
        if !(alpha > 0.0 && alpha < 1.0) || !(t > 0.0) || !(w >= 0.0) {
            return Err(Error::Domain(format!(
                "beta measure needs 0 < alpha < 1, t > 0, w >= 0; got alpha = {alpha}, t = {t}, w = {w}"
            )));
        }
        Ok(BetaMeasure { alpha, t, w })
    }

    pub fn density(&self, s: f64) -> f64 {
        if !(s > 0.0 || self.w > 0.0) || !(s < self.t) {
            return 0.0;
        }
        (self.w + s).powf(self.alpha - 1.0) * (self.t - s).powf(-self.alpha)
    }

    /// `pi / sin(alpha pi)`, the mass of the unshifted measure for every `t`.
    pub fn exact_mass(&self) -> f64 {
        PI / (self.alpha * PI).sin()
    }

    /// Gauss-Jacobi rule on `[0, t]` carrying the density in its weights.
    ///
    /// Unshifted: exponents `(-alpha, alpha - 1)` at the ends `s = t`, `s = 0`.
    /// Shifted: exponents `(-alpha, 0)` with `(w + s)^{alpha-1}` folded into
    /// the weights.
    pub fn rule(&self, n: usize) -> Result<QuadratureRule> {
        let half = 0.5 * self.t;
        if self.w == 0.0 {
            let base = gauss_jacobi(n, -self.alpha, self.alpha - 1.0)?;
            // (t/2)^{alpha-1} (t/2)^{-alpha} (t/2) = 1
            Ok(QuadratureRule {
                nodes: base.nodes.iter().map(|x| half * (1.0 + x)).collect(),
                weights: base.weights,
            })
        } else {
            let base = gauss_jacobi(n, -self.alpha, 0.0)?;
            let scale = half.powf(1.0 - self.alpha);
            let nodes: Vec<f64> = base.nodes.iter().map(|x| half * (1.0 + x)).collect();
            let weights = nodes
                .iter()
                .zip(&base.weights)
                .map(|(s, w)| w * scale * (self.w + s).powf(self.alpha - 1.0))
                .collect();
            Ok(QuadratureRule { nodes, weights })
        }
    }

    pub fn mass(&self, n: usize) -> Result<f64> {
        Ok(self.rule(n)?.weights.iter().sum())
    }
}

/// Per-eigenvalue data of a batched Duhamel-type integral
/// `int_0^t V_B diag(g(s, lambda_B)) G diag(h(t - s, lambda_A)) c_A ds`.
struct Batch<'a> {
    b: &'a SpectralFactorization,
    coupling: CMat,
    ca: Vec<Complex64>,
}

impl Batch<'_> {
    fn integrate(
        &self,
        a: &SpectralFactorization,
        rule: &QuadratureRule,
        t: f64,
        outer: impl Fn(f64, Complex64) -> Complex64,
        inner: impl Fn(f64, Complex64) -> Complex64,
        density: impl Fn(f64) -> f64,
    ) -> Vec<Complex64> {
        let n = self.ca.len();
        let q = rule.nodes.len();
        let la = a.eigenvalues();
        let lb = self.b.eigenvalues();
        let x = Mat::from_fn(n, q, |k, j| inner(t - rule.nodes[j], la[k]) * self.ca[k]);
        let y = &self.coupling * &x;
        let mut r = vec![ZERO; n];
        for (j, (&s, &w)) in rule.nodes.iter().zip(&rule.weights).enumerate() {
            let wd = w * density(s);
            for k in 0..n {
                r[k] += outer(s, lb[k]) * y[(k, j)] * wd;
            }
        }
        self.b.synthesize(&r)
    }
}

fn boundary_layer(a: &SpectralFactorization, b: &SpectralFactorization) -> f64 {
    1.0 / a.max_modulus().max(b.max_modulus())
}

fn exp_of(s: f64, z: Complex64) -> Complex64 {
    (-z * s).exp()
}

fn psi(beta: f64) -> impl Fn(f64, Complex64) -> Complex64 {
    move |s, z| {
        let w = z * s;
        if w == ZERO {
            ZERO
        } else {
            (w.ln() * beta - w).exp()
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    Ok(())
}

/// `int_0^t T^B_s (L_B - L_A) T^A_{t-s} f ds` by graded Gauss-Legendre.
pub fn duhamel_integral(
    a: &SpectralFactorization,
    b: &SpectralFactorization,
    f: &GridFunction,
    t: f64,
    n_quad: usize,
) -> Result<Vec<Complex64>> {
    check_time(t)?;
    a.check_same(b)?;
    let x = a.layout().restrict(f)?;
    let diff = b.matrix() - a.matrix();
    let batch = Batch {
        b,
        coupling: &(b.inverse_eigenvectors() * &diff) * a.right_eigenvectors(),
        ca: a.coefficients(&x),
    };
    let rule = graded_legendre(0.0, t, boundary_layer(a, b), n_quad);
    Ok(batch.integrate(a, &rule, t, exp_of, exp_of, |_| 1.0))
}

/// `T^A_t f - T^B_t f` from the two factorizations.
pub fn semigroup_difference(a: &SpectralFactorization, b: &SpectralFactorization, f: &GridFunction, t: f64) -> Result<Vec<Complex64>> {
    let x = a.layout().restrict(f)?;
    let e = crate::calculus::MultiplierSpec::exp(t);
    let ta = a.apply(&e, &x, crate::calculus::KernelMode::Full)?;
    let tb = b.apply(&e, &x, crate::calculus::KernelMode::Full)?;
    Ok(ta.iter().zip(&tb).map(|(p, q)| p - q).collect())
}

fn relative(x: &[Complex64], y: &[Complex64], mass: &[f64]) -> f64 {
    let d: Vec<Complex64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
    let num = linalg::weighted_norm(&d, mass);
    let den = linalg::weighted_norm(y, mass);
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

/// Residual of the Duhamel formula: relative to `||T^A_t f - T^B_t f||`, or
/// absolute when that difference vanishes.
pub fn duhamel_residual(
    a: &SpectralFactorization,
    b: &SpectralFactorization,
    f: &GridFunction,
    t: f64,
    n_quad: usize,
) -> Result<f64> {
    let integral = duhamel_integral(a, b, f, t, n_quad)?;
    let exact = semigroup_difference(a, b, f, t)?;
    Ok(relative(&integral, &exact, a.mass()))
}

/// The two unfactorized pieces `int L_B T^B_s T^A_{t-s} f ds` and
/// `int T^B_s L_A T^A_{t-s} f ds`.
pub fn duhamel_split(
    a: &SpectralFactorization,
    b: &SpectralFactorization,
    f: &GridFunction,
    t: f64,
    n_quad: usize,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    check_time(t)?;
    a.check_same(b)?;
    let x = a.layout().restrict(f)?;
    let ca = a.coefficients(&x);
    let rule = graded_legendre(0.0, t, boundary_layer(a, b), n_quad);
    let coupling = b.inverse_eigenvectors() * a.right_eigenvectors();
    let one = Batch { b, coupling, ca };
    let lb = |s: f64, z: Complex64| z * exp_of(s, z);
    let first = one.integrate(a, &rule, t, lb, exp_of, |_| 1.0);
    let la = |s: f64, z: Complex64| z * exp_of(s, z);
    let second = one.integrate(a, &rule, t, exp_of, la, |_| 1.0);
    Ok((first, second))
}

/// Factorized pieces
/// `I_t = int psi_{1-alpha}(s L_B) U psi_alpha((t-s) L_A) f dmu^t_alpha(s)` and
/// `II_t = int psi_alpha(s L_B) V psi_{1-alpha}((t-s) L_A) f dmu^t_{1-alpha}(s)`.
///
/// Both are evaluated as integrand times density on a graded Gauss-Legendre
/// mesh: the factorized integrands carry `s^{1-alpha}` and `(t-s)^alpha`
/// factors that cancel the density singularities, so a Jacobi rule would
/// converge only algebraically on them. The result is checked against the
/// same computation at half the nodes.
pub fn duhamel_factorized(
    plan: &TransferPlan,
    f: &GridFunction,
    t: f64,
    n_quad: usize,
) -> Result<(GridFunction, GridFunction)> {
    let (i_full, ii_full) = factorized_pieces(plan, f, t, n_quad)?;
    let (i_half, ii_half) = factorized_pieces(plan, f, t, n_quad / 2)?;
    let mass = plan.a.mass();
    let scale = linalg::weighted_norm(&i_full, mass).max(linalg::weighted_norm(&ii_full, mass));
    if scale > 0.0 {
        let gap = relative(&i_half, &i_full, mass).max(relative(&ii_half, &ii_full, mass));
        if gap > FACTORIZED_TOL {
            return Err(Error::Accuracy {
                what: "factorized Duhamel quadrature".into(),
                residual: gap,
            });
        }
    }
    Ok((plan.a.layout().extend(&i_full), plan.a.layout().extend(&ii_full)))
}

const FACTORIZED_TOL: f64 = 1e-7;

/// `I_t` with the density carried by the Gauss-Jacobi weights of `mu^t_alpha`.
/// Converges only algebraically because the factorized integrand has the
/// endpoint behaviour `s^{1-alpha}`; kept as a cross-check of the measure.
pub fn factorized_first_jacobi(plan: &TransferPlan, f: &GridFunction, t: f64, n_quad: usize) -> Result<Vec<Complex64>> {
    check_time(t)?;
    let (a, b) = (&plan.a, &plan.b);
    let x = a.layout().restrict(f)?;
    let rule = BetaMeasure::new(plan.alpha, t)?.rule(n_quad)?;
    Ok(Batch {
        b,
        coupling: &(b.inverse_eigenvectors() * &plan.u_matrix) * a.right_eigenvectors(),
        ca: a.coefficients(&x),
    }
    .integrate(a, &rule, t, psi(1.0 - plan.alpha), psi(plan.alpha), |_| 1.0))
}

fn factorized_pieces(plan: &TransferPlan, f: &GridFunction, t: f64, n_quad: usize) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    check_time(t)?;
    let (a, b) = (&plan.a, &plan.b);
    let alpha = plan.alpha;
    let beta = 1.0 - alpha;
    let x = a.layout().restrict(f)?;
    let ca = a.coefficients(&x);
    let rule = graded_legendre(0.0, t, boundary_layer(a, b), n_quad);
    let mu_alpha = BetaMeasure::new(alpha, t)?;
    let mu_beta = BetaMeasure::new(beta, t)?;

    let first = Batch {
        b,
        coupling: &(b.inverse_eigenvectors() * &plan.u_matrix) * a.right_eigenvectors(),
        ca: ca.clone(),
    }
    .integrate(a, &rule, t, psi(beta), psi(alpha), |s| mu_alpha.density(s));
    let second = Batch {
        b,
        coupling: &(b.inverse_eigenvectors() * &plan.v_matrix) * a.right_eigenvectors(),
        ca,
    }
    .integrate(a, &rule, t, psi(alpha), psi(beta), |s| mu_beta.density(s));
    Ok((first, second))
}

/// Agreement report of the factorized and unfactorized Duhamel pieces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuhamelReport {
    pub t: f64,
    pub n_quad: usize,
    /// Direct residual against `T^A_t f - T^B_t f`.
    pub direct_residual: f64,
    /// `I_t` against `int L_B T^B_s T^A_{t-s} f ds`.
    pub first_gap: f64,
    /// `II_t` against `int T^B_s L_A T^A_{t-s} f ds`.
    pub second_gap: f64,
    /// `I_t - II_t` against `T^A_t f - T^B_t f`.
    pub difference_gap: f64,
}

impl DuhamelReport {
    pub fn factorized_gap(&self) -> f64 {
        self.first_gap.max(self.second_gap).max(self.difference_gap)
    }
}

pub fn duhamel_report(plan: &TransferPlan, f: &GridFunction, t: f64, n_quad: usize) -> Result<DuhamelReport> {
    let (a, b) = (&plan.a, &plan.b);
    let mass = a.mass();
    let direct_residual = duhamel_residual(a, b, f, t, n_quad)?;
    let (d1, d2) = duhamel_split(a, b, f, t, n_quad)?;
    let (i_t, ii_t) = duhamel_factorized(plan, f, t, n_quad)?;
    let i_t = a.layout().restrict(&i_t)?;
    let ii_t = a.layout().restrict(&ii_t)?;
    let exact = semigroup_difference(a, b, f, t)?;
    let diff: Vec<Complex64> = i_t.iter().zip(&ii_t).map(|(p, q)| p - q).collect();
    Ok(DuhamelReport {
        t,
        n_quad,
        direct_residual,
        first_gap: relative(&i_t, &d1, mass),
        second_gap: relative(&ii_t, &d2, mass),
        difference_gap: relative(&diff, &exact, mass),
    })
}
