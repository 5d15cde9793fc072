use crate::calculus::{KernelMode, RotationSign, SpectralFactorization, Symbol};
use crate::error::{Error, Result};
use crate::grid::GridFunction;
use crate::linalg::CMat;
use crate::quadrature::graded_legendre;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Default density of time samples.
pub const POINTS_PER_DECADE: usize = 60;
/// Decades added beyond the spectral time scales on each side.
const MARGIN_DECADES: f64 = 4.0;

/// Logarithmic sample of `(0, inf)`, optionally with the `t = 0` endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub per_decade: usize,
    pub include_zero: bool,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, per_decade: usize, include_zero: bool) -> Result<TimeGrid> {
        if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || per_decade == 0 {
            return Err(Error::Domain(format!(
                "time grid needs 0 < t_min < t_max < inf and a positive density, got [{t_min}, {t_max}] at {per_decade}"
            )));
        }
        Ok(TimeGrid {
            t_min,
            t_max,
            per_decade,
            include_zero,
        })
    }

    /// `[1e-4 / |lambda|_max, 1e4 / |lambda|_min]` at the given density, with `t = 0`.
    pub fn for_spectrum(f_l: &SpectralFactorization, per_decade: usize) -> Result<TimeGrid> {
        let margin = 10f64.powf(MARGIN_DECADES);
        TimeGrid::new(1.0 / (margin * f_l.max_modulus()), margin / f_l.min_modulus(), per_decade, true)
    }

    /// Grid covering the time scales of both operators.
    pub fn for_pair(a: &SpectralFactorization, b: &SpectralFactorization, per_decade: usize) -> Result<TimeGrid> {
        let margin = 10f64.powf(MARGIN_DECADES);
        let hi = a.max_modulus().max(b.max_modulus());
        let lo = a.min_modulus().min(b.min_modulus());
        TimeGrid::new(1.0 / (margin * hi), margin / lo, per_decade, true)
    }

    /// Twice the density over the same range.
    pub fn refined(&self) -> TimeGrid {
        TimeGrid {
            per_decade: 2 * self.per_decade,
            ..self.clone()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let decades = (self.t_max / self.t_min).log10();
        let count = (decades * self.per_decade as f64).ceil() as usize + 1;
        let step = decades / (count - 1) as f64;
        let mut out = Vec::with_capacity(count + 1);
        if self.include_zero {
            out.push(0.0);
        }
        out.extend((0..count).map(|k| self.t_min * 10f64.powf(k as f64 * step)));
        out
    }
}

/// Which maximal operator a scan approximates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    Single,
    Ergodic,
    Difference,
    TwoParameter,
}

/// Pointwise supremum over a time grid and its `L^p` ratio.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaximalScan {
    pub which: ScanKind,
    pub t_grid: TimeGrid,
    pub per_node_sup: GridFunction,
    pub p: f64,
    /// `||sup||_p / ||f||_p`
    pub ratio: f64,
    /// Relative change of the ratio when the time grid is doubled.
    pub grid_sensitivity: Option<f64>,
    /// Largest pointwise violation of `M^A <= M^B + M^{A,B}` (difference scans).
    pub split_violation: Option<f64>,
    /// Largest pointwise violation of the positivity domination (two-parameter
    /// scans with a positive first semigroup).
    pub domination_violation: Option<f64>,
}

impl MaximalScan {
    fn new(which: ScanKind, t_grid: &TimeGrid, f: &GridFunction, sup: Vec<f64>, p: f64) -> Result<MaximalScan> {
        let per_node_sup = GridFunction::new(&f.grid, sup.into_iter().map(|v| Complex64::new(v, 0.0)).collect())?;
        let denom = f.lp_norm(p)?;
        let ratio = if denom == 0.0 { 0.0 } else { per_node_sup.lp_norm(p)? / denom };
        Ok(MaximalScan {
            which,
            t_grid: t_grid.clone(),
            per_node_sup,
            p,
            ratio,
            grid_sensitivity: None,
            split_violation: None,
            domination_violation: None,
        })
    }

    pub fn sup_values(&self) -> Vec<f64> {
        self.per_node_sup.values.iter().map(|v| v.re).collect()
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) {
        return Err(Error::Domain(format!("maximal scans need p in (1, inf], got {p}")));
    }
    Ok(())
}

/// Running pointwise maximum of the moduli of the columns of `orbit`.
fn column_sup(orbit: &CMat, sup: &mut [f64]) {
    for j in 0..orbit.ncols() {
        for (i, s) in sup.iter_mut().enumerate() {
            *s = s.max(orbit[(i, j)].norm());
        }
    }
}

/// Columns per batched product, bounding the memory of an orbit.
const BATCH: usize = 512;

fn orbit_sup(f_l: &SpectralFactorization, symbol: &Symbol, times: &[f64], c: &[Complex64]) -> Result<Vec<f64>> {
    let mut sup = vec![0.0; f_l.len()];
    for chunk in times.chunks(BATCH) {
        column_sup(&f_l.orbit_from_coefficients(symbol, chunk, c, KernelMode::Full)?, &mut sup);
    }
    Ok(sup)
}

fn extend_sup(f_l: &SpectralFactorization, sup: &[f64]) -> Vec<f64> {
    let mut full = vec![0.0; f_l.layout().grid.node_count()];
    for (&k, v) in f_l.layout().free.iter().zip(sup) {
        full[k] = *v;
    }
    full
}

fn single_like(
    f_l: &SpectralFactorization,
    f: &GridFunction,
    p: f64,
    t_grid: &TimeGrid,
    symbol: Symbol,
    which: ScanKind,
) -> Result<MaximalScan> {
    check_p(p)?;
    let c = f_l.coefficients(&f_l.layout().restrict(f)?);
    let sup = orbit_sup(f_l, &symbol, &t_grid.times(), &c)?;
    MaximalScan::new(which, t_grid, &f_l.layout().admissible(f)?, extend_sup(f_l, &sup), p)
}

/// `sup_t |e^{-tL} f|` over the grid.
pub fn maximal_scan(f_l: &SpectralFactorization, f: &GridFunction, p: f64, t_grid: &TimeGrid) -> Result<MaximalScan> {
    single_like(f_l, f, p, t_grid, Symbol::Exp, ScanKind::Single)
}

/// Attaches the ratio change under doubling of the time grid.
pub fn with_refinement(
    scan: MaximalScan,
    rescan: impl FnOnce(&TimeGrid) -> Result<MaximalScan>,
) -> Result<MaximalScan> {
    let fine = rescan(&scan.t_grid.refined())?;
    let sensitivity = if scan.ratio == 0.0 { 0.0 } else { (fine.ratio - scan.ratio).abs() / scan.ratio };
    Ok(MaximalScan {
        grid_sensitivity: Some(sensitivity),
        ..scan
    })
}

/// `sup_t |(1/t) int_0^t e^{-sL} f ds|`, through the symbol `(1 - e^{-z}) / z`.
pub fn ergodic_scan(f_l: &SpectralFactorization, f: &GridFunction, p: f64, t_grid: &TimeGrid) -> Result<MaximalScan> {
    single_like(f_l, f, p, t_grid, Symbol::ErgodicMean, ScanKind::Ergodic)
}

/// Relative size of `T_t f - avg_t f + (1/t) int_0^t psi_1(sL) f ds`, with the
/// integral done by graded Gauss-Legendre quadrature.
pub fn ergodic_comparison_residual(f_l: &SpectralFactorization, f: &GridFunction, t: f64, n_quad: usize) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("time must be positive, got {t}")));
    }
    let c = f_l.coefficients(&f_l.layout().restrict(f)?);
    let rule = graded_legendre(0.0, t, 1.0 / f_l.max_modulus(), n_quad);
    let psi = f_l.orbit_from_coefficients(&Symbol::Psi { beta: 1.0 }, &rule.nodes, &c, KernelMode::Full)?;
    let ends = f_l.orbit_from_coefficients(&Symbol::Exp, &[t], &c, KernelMode::Full)?;
    let avg = f_l.orbit_from_coefficients(&Symbol::ErgodicMean, &[t], &c, KernelMode::Full)?;
    let mass = f_l.mass();
    let mut res = 0.0;
    let mut scale = 0.0;
    for i in 0..f_l.len() {
        let integral: Complex64 = rule.weights.iter().enumerate().map(|(j, w)| psi[(i, j)] * *w).sum::<Complex64>() / t;
        let r = ends[(i, 0)] - avg[(i, 0)] + integral;
        res += mass[i] * r.norm_sqr();
        scale += mass[i] * ends[(i, 0)].norm_sqr().max(avg[(i, 0)].norm_sqr());
    }
    Ok(if scale == 0.0 { res.sqrt() } else { (res / scale).sqrt() })
}

/// Largest pointwise gap between `T^A_t f - T^B_t f` and the multiplier route
/// `m_theta(t L_B) f`, relative to `max |f|`, when `A = e^{i theta} B`.
pub fn rotation_equivalence_gap(
    f_a: &SpectralFactorization,
    f_b: &SpectralFactorization,
    theta: f64,
    f: &GridFunction,
    times: &[f64],
) -> Result<f64> {
    let d = difference_orbit(f_a, f_b, f, times)?;
    let x = f_b.layout().restrict(f)?;
    let m = f_b.orbit(&Symbol::MTheta { theta, sign: RotationSign::Plus }, times, &x, KernelMode::Full)?;
    let scale = x.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut gap: f64 = 0.0;
    for j in 0..times.len() {
        for i in 0..x.len() {
            gap = gap.max((d[(i, j)] - m[(i, j)]).norm());
        }
    }
    Ok(if scale == 0.0 { gap } else { gap / scale })
}

/// `T^A_t f - T^B_t f` for every `t` as columns.
pub fn difference_orbit(
    f_a: &SpectralFactorization,
    f_b: &SpectralFactorization,
    f: &GridFunction,
    times: &[f64],
) -> Result<CMat> {
    f_a.check_same(f_b)?;
    let x = f_a.layout().restrict(f)?;
    let ta = f_a.orbit(&Symbol::Exp, times, &x, KernelMode::Full)?;
    let tb = f_b.orbit(&Symbol::Exp, times, &x, KernelMode::Full)?;
    Ok(&ta - &tb)
}

/// `sup_t |T^A_t f - T^B_t f|`, with the pointwise split inequality
/// `M^A <= M^B + M^{A,B}` checked on the same grid.
pub fn difference_scan(
    f_a: &SpectralFactorization,
    f_b: &SpectralFactorization,
    f: &GridFunction,
    p: f64,
    t_grid: &TimeGrid,
) -> Result<MaximalScan> {
    check_p(p)?;
    f_a.check_same(f_b)?;
    let x = f_a.layout().restrict(f)?;
    let (ca, cb) = (f_a.coefficients(&x), f_b.coefficients(&x));
    let n = f_a.len();
    let (mut sup_a, mut sup_b, mut sup_d) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for chunk in t_grid.times().chunks(BATCH) {
        let ta = f_a.orbit_from_coefficients(&Symbol::Exp, chunk, &ca, KernelMode::Full)?;
        let tb = f_b.orbit_from_coefficients(&Symbol::Exp, chunk, &cb, KernelMode::Full)?;
        column_sup(&ta, &mut sup_a);
        column_sup(&tb, &mut sup_b);
        column_sup(&(&ta - &tb), &mut sup_d);
    }
    let violation = (0..n).map(|i| sup_a[i] - sup_b[i] - sup_d[i]).fold(f64::NEG_INFINITY, f64::max);
    let mut scan = MaximalScan::new(ScanKind::Difference, t_grid, &f_a.layout().admissible(f)?, extend_sup(f_a, &sup_d), p)?;
    scan.split_violation = Some(violation.max(0.0));
    Ok(scan)
}

/// `true` when `e^{-wL}` is entrywise non-negative, i.e. `-L` has
/// non-negative off-diagonal part and `L` is real.
pub fn generates_positive_semigroup(f_l: &SpectralFactorization) -> bool {
    let m = f_l.matrix();
    let scale = (0..m.nrows()).map(|i| m[(i, i)].norm()).fold(0.0, f64::max);
    let tol = 1e-12 * scale;
    (0..m.nrows()).all(|i| {
        (0..m.ncols()).all(|j| m[(i, j)].im.abs() <= tol && (i == j || m[(i, j)].re <= tol))
    })
}

/// `sup_{w,t} |T^{A1}_w T^{A2}_t f|` on the product of two time grids.
///
/// When `A1` generates a positive semigroup the scan also checks
/// `|T^{A1}_w T^{A2}_t f| <= T^{A1}_w (M^{A2} f)` at every node.
pub fn two_parameter_scan(
    f_1: &SpectralFactorization,
    f_2: &SpectralFactorization,
    f: &GridFunction,
    p: f64,
    w_grid: &TimeGrid,
    t_grid: &TimeGrid,
) -> Result<MaximalScan> {
    check_p(p)?;
    f_1.check_same(f_2)?;
    let n = f_1.len();
    let x = f_1.layout().restrict(f)?;
    let c2 = f_2.coefficients(&x);
    let ts = t_grid.times();
    let ws = w_grid.times();

    // inner orbit T^{A2}_t f, in A1 eigen-coordinates: W = V1^{-1} V2
    let w_mat = f_1.inverse_eigenvectors() * f_2.right_eigenvectors();
    let mut inner = Mat::<Complex64>::zeros(n, ts.len());
    for (j, &t) in ts.iter().enumerate() {
        for k in 0..n {
            let z = if Some(k) == f_2.kernel_index() { Complex64::new(1.0, 0.0) } else { (-f_2.eigenvalues()[k] * t).exp() };
            inner[(k, j)] = z * c2[k];
        }
    }
    let inner1 = &w_mat * &inner;

    let decay1: Vec<Vec<Complex64>> = ws
        .iter()
        .map(|&w| {
            (0..n)
                .map(|k| if Some(k) == f_1.kernel_index() { Complex64::new(1.0, 0.0) } else { (-f_1.eigenvalues()[k] * w).exp() })
                .collect()
        })
        .collect();

    let mut sup = vec![0.0; n];
    for d in &decay1 {
        let scaled = Mat::from_fn(n, ts.len(), |k, j| inner1[(k, j)] * d[k]);
        column_sup(&(f_1.right_eigenvectors() * &scaled), &mut sup);
    }

    let domination_violation = if generates_positive_semigroup(f_1) {
        let inner_orbit = f_2.right_eigenvectors() * &inner;
        let mut m2 = vec![0.0; n];
        column_sup(&inner_orbit, &mut m2);
        let m2c: Vec<Complex64> = m2.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        let cm = f_1.coefficients(&m2c);
        let dominating = f_1.orbit_from_coefficients(&Symbol::Exp, &ws, &cm, KernelMode::Full)?;
        let mut worst: f64 = 0.0;
        for (jw, d) in decay1.iter().enumerate() {
            let scaled = Mat::from_fn(n, ts.len(), |k, j| inner1[(k, j)] * d[k]);
            let vals = f_1.right_eigenvectors() * &scaled;
            for j in 0..ts.len() {
                for i in 0..n {
                    worst = worst.max(vals[(i, j)].norm() - dominating[(i, jw)].re);
                }
            }
        }
        Some(worst.max(0.0))
    } else {
        None
    };

    let mut scan = MaximalScan::new(ScanKind::TwoParameter, t_grid, &f_1.layout().admissible(f)?, extend_sup(f_1, &sup), p)?;
    scan.domination_violation = domination_violation;
    Ok(scan)
}

/// Pointwise moduli `|T_t f|` for inspection and CSV export.
pub fn orbit_moduli(f_l: &SpectralFactorization, f: &GridFunction, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let x = f_l.layout().restrict(f)?;
    let o = f_l.orbit(&Symbol::Exp, times, &x, KernelMode::Full)?;
    Ok((0..o.ncols()).map(|j| (0..o.nrows()).map(|i| o[(i, j)].norm()).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::{factorize, MultiplierSpec};
    use crate::discretize::{assemble, builtin_field, MatrixField};
    use crate::ellipticity::ComplexMatrix;
    use crate::grid::{random_test_function, BoundaryCondition, Grid, Smoothness};
    use crate::linalg;
    use std::f64::consts::PI;

    fn real_op(n: usize) -> SpectralFactorization {
        let g = Grid::interval(1.0, n).unwrap();
        let field = MatrixField::from_fn(&g, |x| ComplexMatrix::from_real(1, &[1.0 + 0.5 * (4.0 * x[0]).cos()]).unwrap()).unwrap();
        factorize(&assemble(&field, &BoundaryCondition::Dirichlet).unwrap()).unwrap()
    }

    #[test]
    fn time_grid_shape() {
        let g = TimeGrid::new(1e-3, 1e3, 10, true).unwrap();
        let t = g.times();
        assert_eq!(t.len(), 62);
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 1e-3).abs() < 1e-18 && (t[61] - 1e3).abs() < 1e-9);
        assert_eq!(g.refined().times().len(), 122);
        assert!(TimeGrid::new(1.0, 1.0, 10, false).is_err());
    }

    #[test]
    fn eigenfunction_ratio_is_one() {
        let f_l = real_op(40);
        let v = linalg::column(f_l.right_eigenvectors().as_ref(), 2);
        let f = f_l.layout().extend(&v);
        let grid = TimeGrid::for_spectrum(&f_l, 20).unwrap();
        let scan = maximal_scan(&f_l, &f, 2.0, &grid).unwrap();
        assert!((scan.ratio - 1.0).abs() < 1e-10);
        for (s, v) in scan.sup_values().iter().zip(&f.values) {
            assert!((s - v.norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn sup_dominates_f() {
        let f_l = real_op(30);
        let f = f_l.layout().admissible(&random_test_function(&f_l.layout().grid, 4, Smoothness::Rough)).unwrap();
        for p in [1.5, 2.0, 4.0, f64::INFINITY] {
            let scan = maximal_scan(&f_l, &f, p, &TimeGrid::for_spectrum(&f_l, 10).unwrap()).unwrap();
            for (s, v) in scan.sup_values().iter().zip(&f.values) {
                assert!(*s >= v.norm() - 1e-12);
            }
            assert!(scan.ratio >= 1.0 - 1e-3);
        }
        assert!(maximal_scan(&f_l, &f, 1.0, &TimeGrid::for_spectrum(&f_l, 10).unwrap()).is_err());
    }

    #[test]
    fn supersolution_is_its_own_maximal_function() {
        // f = x(1 - x) has -f'' = 2 >= 0, so the positive heat flow only decreases it
        let g = Grid::interval(1.0, 41).unwrap();
        let field = MatrixField::constant(&g, &ComplexMatrix::identity(1)).unwrap();
        let f_l = factorize(&assemble(&field, &BoundaryCondition::Dirichlet).unwrap()).unwrap();
        let f = GridFunction::from_fn(&g, |x| Complex64::new(x[0] * (1.0 - x[0]), 0.0));
        let scan = maximal_scan(&f_l, &f, 2.0, &TimeGrid::for_spectrum(&f_l, 20).unwrap()).unwrap();
        for (s, v) in scan.sup_values().iter().zip(&f.values) {
            assert!((s - v.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn ergodic_limits_and_identity() {
        let f_l = real_op(30);
        let k = 1;
        let v = linalg::column(f_l.right_eigenvectors().as_ref(), k);
        let lam = f_l.eigenvalues()[k];
        let f = f_l.layout().extend(&v);
        let x = f_l.layout().restrict(&f).unwrap();
        let tiny = f_l.apply(&MultiplierSpec::new(Symbol::ErgodicMean, 1e-14).unwrap(), &x, KernelMode::Full).unwrap();
        assert!(tiny.iter().zip(&x).all(|(a, b)| (a - b).norm() < 1e-10));
        let t = 0.7 / lam.re;
        let avg = f_l.apply(&MultiplierSpec::new(Symbol::ErgodicMean, t).unwrap(), &x, KernelMode::Full).unwrap();
        // scalar midpoint-rule oracle for (1/t) int_0^t e^{-s lambda} ds
        let m = 200_000;
        let h = t / m as f64;
        let scalar: Complex64 = (0..m).map(|j| (-lam * ((j as f64 + 0.5) * h)).exp() * h).sum::<Complex64>() / t;
        for (a, b) in avg.iter().zip(&x) {
            assert!((a - scalar * b).norm() < 1e-9);
        }
        let g = random_test_function(&f_l.layout().grid, 8, Smoothness::Rough);
        for t in [1e-4, 1e-2, 1.0] {
            assert!(ergodic_comparison_residual(&f_l, &g, t, 400).unwrap() < 1e-8);
        }
        let scan = ergodic_scan(&f_l, &g, 2.0, &TimeGrid::for_spectrum(&f_l, 10).unwrap()).unwrap();
        assert!(scan.ratio >= 1.0 - 1e-3);
    }

    #[test]
    fn difference_of_identical_and_rotated_operators() {
        let g = Grid::interval(1.0, 30).unwrap();
        let b_field = builtin_field("real_symmetric", &g).unwrap();
        let f_b = factorize(&assemble(&b_field, &BoundaryCondition::Dirichlet).unwrap()).unwrap();
        let f = random_test_function(&g, 9, Smoothness::Smooth);
        let grid = TimeGrid::for_spectrum(&f_b, 10).unwrap();
        let same = difference_scan(&f_b, &f_b, &f, 2.0, &grid).unwrap();
        assert_eq!(same.ratio, 0.0);

        let theta = PI / 6.0;
        let f_a = factorize(&assemble(&b_field.scale(Complex64::from_polar(1.0, theta)), &BoundaryCondition::Dirichlet).unwrap()).unwrap();
        let scan = difference_scan(&f_a, &f_b, &f, 2.0, &grid).unwrap();
        assert!(scan.split_violation.unwrap() <= 1e-12);
        assert!(rotation_equivalence_gap(&f_a, &f_b, theta, &f, &grid.times()).unwrap() <= 1e-10);

        let other = factorize(&assemble(&builtin_field("identity", &Grid::interval(1.0, 31).unwrap()).unwrap(), &BoundaryCondition::Dirichlet).unwrap()).unwrap();
        assert!(matches!(difference_scan(&f_a, &other, &f, 2.0, &grid), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn two_parameter_cases() {
        let f_a = real_op(24);
        let f = random_test_function(&f_a.layout().grid, 12, Smoothness::Smooth);
        let grid = TimeGrid::for_spectrum(&f_a, 8).unwrap();
        let single = maximal_scan(&f_a, &f, 2.0, &grid).unwrap();
        let two = two_parameter_scan(&f_a, &f_a, &f, 2.0, &grid, &grid).unwrap();
        // w + t covers the single grid and more; the excess is grid slack
        assert!(two.ratio >= single.ratio - 1e-12);
        assert!(two.ratio <= single.ratio * 1.01);
        assert!(generates_positive_semigroup(&f_a));

        let g = f_a.layout().grid.clone();
        let complex = factorize(&assemble(&builtin_field("complex_checkerboard", &g).unwrap(), &BoundaryCondition::Dirichlet).unwrap()).unwrap();
        let scan = two_parameter_scan(&f_a, &complex, &f, 2.0, &grid, &grid).unwrap();
        let slack = 1e-3 * f.lp_norm(f64::INFINITY).unwrap();
        assert!(scan.domination_violation.unwrap() <= slack);
        let scan = two_parameter_scan(&complex, &f_a, &f, 2.0, &grid, &grid).unwrap();
        assert!(scan.domination_violation.is_none());
        assert!(scan.ratio.is_finite());
    }
}
