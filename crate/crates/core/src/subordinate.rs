//! Mellin subordination: closed-form Mellin transforms of the two model
//! symbols, their Stirling envelopes, and the reconstruction
//! `m(tL) f = (1/2 pi) int t^{iu} [M m](u) L^{iu} f du`.
//!
//! The Mellin transform is `[M m](u) = int_0^inf lambda^{-iu} m(lambda) dlambda / lambda`.
//! Both symbols vanish at 0, so the reconstruction is carried out on the
//! complement of the kernel and agrees there with the full functional
//! calculus.

use crate::calculus::{ImaginaryPowerBound, RotationSign, SpectralFactorization, Symbol};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::{self, ZERO};
use crate::quadrature::gauss_legendre;
use crate::special::{gamma, ln_gamma};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

/// Smallest decay-minus-growth margin treated as convergent.
const GAP_FLOOR: f64 = 1e-3;

/// `Gamma(alpha - iu)`.
pub fn mellin_psi(alpha: f64, u: f64) -> Result<Complex64> {
    if !(alpha > 0.0) {
        return Err(Error::Domain(format!("psi needs alpha > 0, got {alpha}")));
    }
    Ok(gamma(Complex64::new(alpha, -u)))
}

/// `i theta (e^{-+theta u} - 1) / (theta u) Gamma(1 - iu)` for
/// `m(lambda) = exp(-e^{+-i theta} lambda) - exp(-lambda)`.
pub fn mellin_m_theta(theta: f64, sign: RotationSign, u: f64) -> Result<Complex64> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(Error::Domain(format!("rotation angle must lie in (0, pi/2), got {theta}")));
    }
    let x = -sign.factor() * theta * u;
    let ratio = if u == 0.0 {
        -sign.factor()
    } else {
        x.exp_m1() / (theta * u)
    };
    Ok(Complex64::new(0.0, theta) * ratio * gamma(Complex64::new(1.0, -u)))
}

/// `sqrt(2 pi) (1 + |u|)^{alpha - 1/2} e^{-pi |u| / 2}`.
pub fn stirling_envelope(alpha: f64, u: f64) -> f64 {
    (2.0 * PI).sqrt() * (1.0 + u.abs()).powf(alpha - 0.5) * (-FRAC_PI_2 * u.abs()).exp()
}

/// `|Gamma(alpha - iu)| / stirling_envelope(alpha, u)`.
pub fn stirling_ratio(alpha: f64, u: f64) -> f64 {
    ln_gamma(Complex64::new(alpha, -u)).re.exp() / stirling_envelope(alpha, u)
}

/// Closed-form Mellin transform of a supported symbol.
pub fn mellin_transform(symbol: &Symbol, u: f64) -> Result<Complex64> {
    match *symbol {
        Symbol::Psi { beta } => mellin_psi(beta, u),
        Symbol::MTheta { theta, sign } => mellin_m_theta(theta, sign, u),
        other => Err(Error::Domain(format!("no closed-form Mellin transform for {other:?}"))),
    }
}

/// `|[M m](u)|` evaluated in log form, valid for arbitrarily large `|u|`.
fn mellin_modulus(symbol: &Symbol, u: f64) -> Result<f64> {
    match *symbol {
        Symbol::Psi { beta } => Ok(ln_gamma(Complex64::new(beta, -u)).re.exp()),
        Symbol::MTheta { theta, sign } => {
            let x = -sign.factor() * theta * u;
            let ratio = if u == 0.0 { 1.0 } else { (x.exp_m1() / (theta * u)).abs() };
            Ok(theta * ratio * ln_gamma(Complex64::new(1.0, -u)).re.exp())
        }
        other => Err(Error::Domain(format!("no closed-form Mellin transform for {other:?}"))),
    }
}

/// Exponential decay rate of `|[M m](u)|` as `|u| -> inf`.
pub fn mellin_decay(symbol: &Symbol) -> Result<f64> {
    symbol
        .mellin_decay()
        .ok_or_else(|| Error::Domain(format!("no Mellin decay rate for {symbol:?}")))
}

/// Upper bound for `|[M m](u)|` with `|u| >= 1`, from the Stirling envelope
/// (whose ratio to `|Gamma|` stays below 2 there).
fn mellin_majorant(symbol: &Symbol, u: f64) -> Result<f64> {
    let a = u.abs().max(1.0);
    match *symbol {
        Symbol::Psi { beta } => Ok(2.0 * stirling_envelope(beta, a)),
        Symbol::MTheta { theta, .. } => Ok(((theta * a).exp() + 1.0) / a * 2.0 * stirling_envelope(1.0, a)),
        other => Err(Error::Domain(format!("no Mellin majorant for {other:?}"))),
    }
}

/// Mellin transform of an arbitrary sampled symbol, `lambda = e^x`, by
/// composite Gauss-Legendre over `x in [x_lo, x_hi]`.
pub fn mellin_quadrature(m: impl Fn(f64) -> Complex64, u: f64, x_lo: f64, x_hi: f64, panels: usize) -> Complex64 {
    let base = gauss_legendre(16);
    let width = (x_hi - x_lo) / panels as f64;
    let mut acc = ZERO;
    for p in 0..panels {
        let rule = base.mapped(x_lo + p as f64 * width, x_lo + (p + 1) as f64 * width);
        for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += m(x.exp()) * Complex64::from_polar(w, -u * x);
        }
    }
    acc
}

/// Mellin transform of a symbol by direct quadrature of its definition, as
/// an independent check of the closed forms. Covers `lambda in [e^-60, 300]`.
pub fn mellin_brute_force(symbol: &Symbol, u: f64) -> Result<Complex64> {
    symbol.validate()?;
    let m = |l: f64| symbol.eval(Complex64::new(l, 0.0)).unwrap_or(ZERO);
    Ok(mellin_quadrature(m, u, -60.0, 300f64.ln(), 4000))
}

/// Mellin samples on the uniform trapezoid grid `u_j in [-U, U]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MellinTable {
    pub symbol: Symbol,
    pub u_samples: Vec<f64>,
    pub values: Vec<Complex64>,
    pub truncation_u: f64,
    /// Bound on `(1/2 pi) int_{|u| > U} |[M m](u)| du`.
    pub tail_bound: f64,
}

impl MellinTable {
    pub fn new(symbol: Symbol, truncation_u: f64, n_quad: usize) -> Result<MellinTable> {
        symbol.validate()?;
        mellin_decay(&symbol)?;
        if !(truncation_u > 0.0) || n_quad < 2 {
            return Err(Error::Domain(format!(
                "need U > 0 and at least two nodes, got U = {truncation_u}, n = {n_quad}"
            )));
        }
        let h = 2.0 * truncation_u / (n_quad - 1) as f64;
        let u_samples: Vec<f64> = (0..n_quad).map(|j| -truncation_u + j as f64 * h).collect();
        let values = u_samples
            .iter()
            .map(|&u| mellin_transform(&symbol, u))
            .collect::<Result<Vec<_>>>()?;
        let tail_bound = tail_integral(&symbol, truncation_u, 0.0, 1.0)?;
        Ok(MellinTable {
            symbol,
            u_samples,
            values,
            truncation_u,
            tail_bound,
        })
    }

    pub fn step(&self) -> f64 {
        self.u_samples[1] - self.u_samples[0]
    }

    /// Trapezoid weights including the `1/2 pi` factor.
    fn weights(&self) -> Vec<Complex64> {
        let h = self.step();
        let last = self.values.len() - 1;
        self.values
            .iter()
            .enumerate()
            .map(|(j, v)| v * (if j == 0 || j == last { 0.5 * h } else { h }) / (2.0 * PI))
            .collect()
    }

    /// `(1/2 pi) sum_j w_j (t z)^{iu_j} [M m](u_j)`: the truncated inverse
    /// transform at a single spectral point.
    pub fn reconstruct_scalar(&self, z: Complex64) -> Complex64 {
        let log_z = z.ln();
        self.weights()
            .iter()
            .zip(&self.u_samples)
            .map(|(w, &u)| w * (Complex64::new(0.0, u) * log_z).exp())
            .sum()
    }

    pub fn to_csv(&self) -> String {
        let alpha = match self.symbol {
            Symbol::Psi { beta } => beta,
            _ => 1.0,
        };
        let mut out = String::from("u,re,im,envelope\n");
        for (u, v) in self.u_samples.iter().zip(&self.values) {
            out.push_str(&format!("{u},{},{},{}\n", v.re, v.im, stirling_envelope(alpha, *u)));
        }
        out
    }
}

/// `(1/2 pi) int_{|u| > U} C e^{growth |u|} majorant(u) du`, by Gauss-Legendre
/// panels out to where the integrand is negligible.
fn tail_integral(symbol: &Symbol, truncation_u: f64, growth: f64, constant: f64) -> Result<f64> {
    let decay = mellin_decay(symbol)?;
    let gap = decay - growth;
    if !(gap > GAP_FLOOR) {
        return Ok(f64::INFINITY);
    }
    let f = |u: f64| mellin_majorant(symbol, u).map(|m| m * (growth * u).exp() * constant);
    // both half-lines contribute the same majorant
    let end = truncation_u + 45.0 / gap + 10.0;
    let panels = ((end - truncation_u).ceil() as usize).clamp(8, 4096);
    let base = gauss_legendre(12);
    let width = (end - truncation_u) / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let rule = base.mapped(truncation_u + p as f64 * width, truncation_u + (p + 1) as f64 * width);
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * f(u)?;
        }
    }
    Ok(2.0 * acc / (2.0 * PI))
}

/// Truncated Cowling reconstruction of `m(tL) f` with default settings
/// checked against a relative tail tolerance.
pub fn cowling_reconstruct(
    f_l: &SpectralFactorization,
    symbol: &Symbol,
    t: f64,
    f: &GridFunction,
    truncation_u: f64,
    n_quad: usize,
    tol: f64,
) -> Result<GridFunction> {
    let table = MellinTable::new(*symbol, truncation_u, n_quad)?;
    reconstruct_with_table(f_l, &table, t, f, tol)
}

/// Reconstruction from a precomputed table; the same table serves every `t`.
pub fn reconstruct_with_table(
    f_l: &SpectralFactorization,
    table: &MellinTable,
    t: f64,
    f: &GridFunction,
    tol: f64,
) -> Result<GridFunction> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let x = f_l.layout().restrict(f)?;
    let c = f_l.coefficients(&x);
    let mass = f_l.mass();
    let vectors = f_l.right_eigenvectors();
    let n = f_l.len();

    let norm_f = linalg::weighted_norm(&x, mass);
    if norm_f == 0.0 {
        return Ok(f_l.layout().extend(&vec![ZERO; n]));
    }
    // ||L^{iu} f|| <= K e^{theta_f |u|}
    let mut k_const = 0.0;
    let mut growth: f64 = 0.0;
    for k in 0..n {
        if Some(k) == f_l.kernel_index() || c[k] == ZERO {
            continue;
        }
        let col = linalg::column(vectors.as_ref(), k);
        k_const += c[k].norm() * linalg::weighted_norm(&col, mass);
        growth = growth.max(f_l.eigenvalues()[k].arg().abs());
    }
    let tail = tail_integral(&table.symbol, table.truncation_u, growth, k_const)?;
    if !(tail <= tol * norm_f) {
        let suggested = suggest_truncation(&table.symbol, table.truncation_u, growth, k_const, tol * norm_f)?;
        return Err(Error::Truncation {
            truncation: table.truncation_u,
            tail,
            suggested,
        });
    }

    let weights = table.weights();
    let mut scaled = vec![ZERO; n];
    for k in 0..n {
        if Some(k) == f_l.kernel_index() || c[k] == ZERO {
            continue;
        }
        let log_z = (f_l.eigenvalues()[k] * t).ln();
        let mut acc = ZERO;
        for (w, &u) in weights.iter().zip(&table.u_samples) {
            acc += w * (Complex64::new(0.0, u) * log_z).exp();
        }
        scaled[k] = acc * c[k];
    }
    Ok(f_l.layout().extend(&f_l.synthesize(&scaled)))
}

fn suggest_truncation(symbol: &Symbol, from: f64, growth: f64, constant: f64, target: f64) -> Result<Option<f64>> {
    if !(mellin_decay(symbol)? > growth + GAP_FLOOR) {
        return Ok(None);
    }
    let mut u = from;
    for _ in 0..20 {
        u *= 1.5;
        if tail_integral(symbol, u, growth, constant)? <= target {
            return Ok(Some(u.ceil()));
        }
    }
    Ok(None)
}

/// `(1/2 pi) int |[M m](u)| C e^{theta |u|} du`: the constant that the
/// imaginary-power growth yields for the maximal operator of `m(tL)`.
pub fn subordination_bound(symbol: &Symbol, ipb: &ImaginaryPowerBound) -> Result<f64> {
    symbol.validate()?;
    let decay = mellin_decay(symbol)?;
    let growth = ipb.fitted_theta;
    // a gap at round-off level is treated as no gap
    if !(growth < decay - GAP_FLOOR) {
        return Err(Error::DivergentBound { growth, decay });
    }
    let gap = decay - growth;
    let end = 60.0 / gap + 20.0;
    let integrand = |u: f64| mellin_modulus(symbol, u).map(|m| m * (growth * u.abs()).exp());
    let half_line = |sign: f64, panels: usize| -> Result<f64> {
        let base = gauss_legendre(10);
        let width = end / panels as f64;
        let mut acc = 0.0;
        for p in 0..panels {
            let rule = base.mapped(p as f64 * width, (p + 1) as f64 * width);
            for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
                acc += w * integrand(sign * u)?;
            }
        }
        Ok(acc)
    };
    let mut panels = (end.ceil() as usize).clamp(8, 512);
    let mut previous = half_line(1.0, panels)? + half_line(-1.0, panels)?;
    for _ in 0..8 {
        panels *= 2;
        let current = half_line(1.0, panels)? + half_line(-1.0, panels)?;
        let residual = (current - previous).abs() / current;
        if residual <= 1e-12 {
            return Ok(ipb.fitted_constant * current / (2.0 * PI));
        }
        previous = current;
    }
    Err(Error::Accuracy {
        what: "subordination bound".into(),
        residual: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{factorize, KernelMode, MultiplierSpec};
    use crate::discretize::{assemble, MatrixField};
    use crate::ellipticity::ComplexMatrix;
    use crate::grid::{random_test_function, BoundaryCondition, Grid, Smoothness};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    /// Independent oracle: trapezoid rule in `x = ln lambda`, which converges
    /// geometrically for integrands decaying at both ends.
    fn mellin_trapezoid(m: impl Fn(f64) -> Complex64, u: f64) -> Complex64 {
        let (lo, hi, h) = (-120.0, 5.0, 2e-3);
        let n = ((hi - lo) / h) as usize;
        (0..=n)
            .map(|k| {
                let x = lo + k as f64 * h;
                let w = if k == 0 || k == n { 0.5 * h } else { h };
                m(x.exp()) * Complex64::from_polar(w, -u * x)
            })
            .sum()
    }

    #[test]
    fn closed_form_values() {
        assert!((mellin_psi(1.0, 0.0).unwrap() - 1.0).norm() < 1e-14);
        assert!((mellin_psi(0.5, 0.0).unwrap() - PI.sqrt()).norm() < 1e-13);
        let v = mellin_m_theta(PI / 4.0, RotationSign::Plus, 0.0).unwrap();
        assert!((v - c(0.0, -PI / 4.0)).norm() < 1e-14);
        let v = mellin_m_theta(PI / 4.0, RotationSign::Minus, 0.0).unwrap();
        assert!((v - c(0.0, PI / 4.0)).norm() < 1e-14);
        assert!(mellin_m_theta(FRAC_PI_2, RotationSign::Plus, 1.0).is_err());
        assert!(mellin_psi(0.0, 1.0).is_err());
        // continuity through u = 0
        let near = mellin_m_theta(0.4, RotationSign::Plus, 1e-9).unwrap();
        assert!((near - mellin_m_theta(0.4, RotationSign::Plus, 0.0).unwrap()).norm() < 1e-8);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let us: Vec<f64> = (0..21).map(|k| -10.0 + k as f64).collect();
        for alpha in [0.3, 1.0, 2.5] {
            for &u in &us {
                let exact = mellin_psi(alpha, u).unwrap();
                let quad = mellin_trapezoid(|l| c(l.powf(alpha) * (-l).exp(), 0.0), u);
                assert!((exact - quad).norm() < 1e-8, "alpha {alpha} u {u}: {exact} vs {quad}");
            }
        }
        for (theta, sign) in [(PI / 4.0, RotationSign::Plus), (PI / 6.0, RotationSign::Minus)] {
            let rot = Complex64::from_polar(1.0, sign.factor() * theta);
            for &u in &us {
                let exact = mellin_m_theta(theta, sign, u).unwrap();
                let quad = mellin_trapezoid(|l| (-rot * l).exp() - (-l).exp(), u);
                assert!((exact - quad).norm() < 1e-8, "theta {theta} u {u}: {exact} vs {quad}");
            }
        }
    }

    #[test]
    fn brute_force_matches_closed_forms() {
        for sym in [Symbol::Psi { beta: 1.0 }, Symbol::MTheta { theta: PI / 6.0, sign: RotationSign::Plus }] {
            for u in [-10.0, -3.5, 0.0, 2.0, 10.0] {
                let d = mellin_brute_force(&sym, u).unwrap() - mellin_transform(&sym, u).unwrap();
                assert!(d.norm() < 1e-8, "{sym:?} {u}: {d}");
            }
        }
    }

    #[test]
    fn sampled_symbol_quadrature() {
        let v = mellin_quadrature(|l| c(l.powf(0.3) * (-l).exp(), 0.0), 2.0, -100.0, 5.0, 400);
        assert!((v - mellin_psi(0.3, 2.0).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn stirling() {
        assert!((stirling_envelope(0.7, 0.0) - (2.0 * PI).sqrt()).abs() < 1e-15);
        let r = stirling_ratio(1.0, 10.0);
        assert!((0.5..=2.0).contains(&r));
        for alpha in [0.1, 0.5, 1.0, 1.5] {
            assert!((stirling_ratio(alpha, 50.0) - 1.0).abs() < 0.05);
            for u in [5.0, 7.5, 12.0, 30.0, 80.0] {
                let r = stirling_ratio(alpha, u);
                assert!((0.5..=2.0).contains(&r), "alpha {alpha} u {u}: {r}");
            }
        }
        // m_theta decays at rate pi/2 - theta
        let theta = PI / 6.0;
        for u in [20.0, 40.0, 80.0] {
            let m = mellin_modulus(&Symbol::MTheta { theta, sign: RotationSign::Minus }, u).unwrap();
            let bound = (1.0 + u).sqrt() * ((theta - FRAC_PI_2) * u).exp();
            assert!(m <= 4.0 * bound);
        }
    }

    #[test]
    fn table_decreases_beyond_crossover() {
        let table = MellinTable::new(Symbol::Psi { beta: 1.0 }, 40.0, 801).unwrap();
        let mags: Vec<f64> = table
            .u_samples
            .iter()
            .zip(&table.values)
            .filter(|(u, _)| **u >= 2.0)
            .map(|(_, v)| v.norm())
            .collect();
        assert!(mags.windows(2).all(|w| w[1] < w[0]));
        assert!(table.tail_bound < 1e-20);
        assert!(table.to_csv().starts_with("u,re,im,envelope\n"));
    }

    fn operator(theta: f64) -> SpectralFactorization {
        let g = Grid::interval(1.0, 24).unwrap();
        let field = MatrixField::from_fn(&g, |x| {
            ComplexMatrix::from_real(1, &[1.0 + 0.5 * (3.0 * x[0]).sin()]).unwrap().scale(Complex64::from_polar(1.0, theta))
        })
        .unwrap();
        factorize(&assemble(&field, &BoundaryCondition::Dirichlet).unwrap()).unwrap()
    }

    #[test]
    fn reconstruction_matches_calculus() {
        let f_l = operator(0.3);
        let f = f_l.layout().admissible(&random_test_function(&f_l.layout().grid, 2, Smoothness::Rough)).unwrap();
        let t = 1.0 / f_l.min_modulus();
        for symbol in [Symbol::Psi { beta: 1.0 }, Symbol::MTheta { theta: PI / 6.0, sign: RotationSign::Plus }] {
            let exact = f_l.apply(&MultiplierSpec::new(symbol, t).unwrap(), &f_l.layout().restrict(&f).unwrap(), KernelMode::Full).unwrap();
            let rec = cowling_reconstruct(&f_l, &symbol, t, &f, 40.0, 2000, 1e-8).unwrap();
            let rec = f_l.layout().restrict(&rec).unwrap();
            let err = linalg::weighted_norm(&rec.iter().zip(&exact).map(|(a, b)| a - b).collect::<Vec<_>>(), f_l.mass())
                / linalg::weighted_norm(&exact, f_l.mass());
            assert!(err < 1e-6, "{symbol:?}: {err}");
        }
        let zero = GridFunction::zeros(&f_l.layout().grid);
        let rec = cowling_reconstruct(&f_l, &Symbol::Psi { beta: 1.0 }, 1.0, &zero, 40.0, 2000, 1e-8).unwrap();
        assert!(rec.values.iter().all(|v| *v == ZERO));
    }

    #[test]
    fn reconstruction_improves_with_truncation() {
        let f_l = operator(0.2);
        let f = f_l.layout().admissible(&random_test_function(&f_l.layout().grid, 5, Smoothness::Smooth)).unwrap();
        let x = f_l.layout().restrict(&f).unwrap();
        let t = 0.5 / f_l.min_modulus();
        let symbol = Symbol::MTheta { theta: PI / 6.0, sign: RotationSign::Minus };
        let exact = f_l.apply(&MultiplierSpec::new(symbol, t).unwrap(), &x, KernelMode::Full).unwrap();
        let mut errors = vec![];
        for u in [10.0, 20.0, 40.0, 80.0] {
            let table = MellinTable::new(symbol, u, 8001).unwrap();
            let rec = reconstruct_with_table(&f_l, &table, t, &f, f64::INFINITY).unwrap();
            let rec = f_l.layout().restrict(&rec).unwrap();
            let d: Vec<Complex64> = rec.iter().zip(&exact).map(|(a, b)| a - b).collect();
            errors.push(linalg::weighted_norm(&d, f_l.mass()));
        }
        for w in errors.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{errors:?}");
        }
        assert!(errors[3] < 1e-8 * linalg::weighted_norm(&exact, f_l.mass()));
    }

    #[test]
    fn truncation_error_suggests_larger_u() {
        let f_l = operator(0.9);
        let f = f_l.layout().admissible(&random_test_function(&f_l.layout().grid, 1, Smoothness::Smooth)).unwrap();
        let symbol = Symbol::MTheta { theta: PI / 6.0, sign: RotationSign::Plus };
        match cowling_reconstruct(&f_l, &symbol, 1.0, &f, 10.0, 400, 1e-10) {
            Err(Error::Truncation { suggested: Some(u), tail, .. }) => {
                assert!(u > 10.0 && tail > 0.0);
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn subordination_bounds() {
        let ipb = ImaginaryPowerBound::exact(0.0, 1.0);
        let psi = Symbol::Psi { beta: 1.0 };
        let b = subordination_bound(&psi, &ipb).unwrap();
        // (1/2 pi) int |Gamma(1 - iu)| du by an independent trapezoid
        let h = 1e-3;
        let direct: f64 = (-40_000..=40_000)
            .map(|k| {
                let u = k as f64 * h;
                let sq = if u == 0.0 { 1.0 } else { PI * u / (PI * u).sinh() };
                sq.sqrt() * h
            })
            .sum::<f64>()
            / (2.0 * PI);
        assert!((b - direct).abs() < 1e-6 * direct, "{b} vs {direct}");
        let doubled = subordination_bound(&psi, &ImaginaryPowerBound::exact(0.0, 2.0)).unwrap();
        assert!((doubled - 2.0 * b).abs() < 1e-12 * b);

        let m = Symbol::MTheta { theta: PI / 6.0, sign: RotationSign::Plus };
        assert!(matches!(
            subordination_bound(&m, &ImaginaryPowerBound::exact(PI / 3.0, 1.0)),
            Err(Error::DivergentBound { .. })
        ));
        assert!(subordination_bound(&m, &ImaginaryPowerBound::exact(0.9, 1.0)).unwrap().is_finite());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn table_reuse_across_scales(log_t in -2.0f64..0.5, seed in 0u64..1000) {
            let f_l = operator(0.25);
            let f = f_l.layout().admissible(&random_test_function(&f_l.layout().grid, seed, Smoothness::Smooth)).unwrap();
            let t = 10f64.powf(log_t) / f_l.min_modulus();
            let symbol = Symbol::Psi { beta: 0.5 };
            let table = MellinTable::new(symbol, 60.0, 4000).unwrap();
            for s in [t, 2.0 * t] {
                let rec = reconstruct_with_table(&f_l, &table, s, &f, 1e-6).unwrap();
                let exact = f_l.apply(&MultiplierSpec::new(symbol, s).unwrap(), &f_l.layout().restrict(&f).unwrap(), KernelMode::Full).unwrap();
                let rec = f_l.layout().restrict(&rec).unwrap();
                let d: Vec<Complex64> = rec.iter().zip(&exact).map(|(a, b)| a - b).collect();
                prop_assert!(linalg::weighted_norm(&d, f_l.mass()) <= 1e-6 * linalg::weighted_norm(&exact, f_l.mass()));
            }
        }
    }
}
