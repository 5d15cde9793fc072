//! One function per experiment kind. Each returns named checks, reported
//! values, warnings and CSV artifacts.

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::record::Check;
use semimax_core::calculus::{imaginary_power_scan, semigroup_contractivity_scan, square_function_vec};
use semimax_core::grid::random_test_function;
use semimax_core::maximal::{
    build_transfer, difference_scan, duhamel_report, ergodic_comparison_residual, ergodic_scan, maximal_scan,
    operator_norm_estimate, rotation_equivalence_gap, two_parameter_scan, with_refinement, MaximalScan,
};
use semimax_core::special::ln_gamma_real;
use semimax_core::subordinate::{
    cowling_reconstruct, mellin_brute_force, mellin_transform, stirling_ratio, subordination_bound, MellinTable,
};
use semimax_core::{
    assemble, factorize, BetaMeasure, ComplexMatrix, Complex64, DiscreteOperator, Error, FieldTag, Grid,
    GridFunction, KernelMode, MatrixField, MultiplierSpec, RotationSign, SearchOptions, Smoothness,
    SpectralFactorization, Symbol, TimeGrid,
};
use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub values: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    /// File name and contents.
    pub artifacts: Vec<(String, String)>,
}

impl Outcome {
    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    fn value(&mut self, name: impl Into<String>, v: f64) {
        self.values.insert(name.into(), v);
    }

    fn merge(&mut self, prefix: &str, other: Outcome) {
        for mut c in other.checks {
            c.name = format!("{prefix}/{}", c.name);
            self.checks.push(c);
        }
        for (k, v) in other.values {
            self.values.insert(format!("{prefix}/{k}"), v);
        }
        self.warnings.extend(other.warnings.into_iter().map(|w| format!("{prefix}: {w}")));
        self.artifacts.extend(other.artifacts.into_iter().map(|(n, c)| (format!("{prefix}_{n}"), c)));
    }
}

/// Fields and factorizations of one configuration.
pub struct Setup<'a> {
    pub cfg: &'a ExperimentConfig,
    pub grid: Grid,
    pub field: MatrixField,
    pub field_b: MatrixField,
    op: std::cell::OnceCell<DiscreteOperator>,
    f_a: std::cell::OnceCell<SpectralFactorization>,
    f_b: std::cell::OnceCell<SpectralFactorization>,
}

impl<'a> Setup<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> std::result::Result<Setup<'a>, crate::config::ConfigError> {
        let grid = cfg.domain.grid()?;
        let field = cfg.field.build(&grid, "field")?;
        let field_b = cfg.field_b().build(&grid, "field_b")?;
        Ok(Setup {
            cfg,
            grid,
            field,
            field_b,
            op: Default::default(),
            f_a: Default::default(),
            f_b: Default::default(),
        })
    }

    fn op(&self) -> Result<&DiscreteOperator> {
        if self.op.get().is_none() {
            let _ = self.op.set(assemble(&self.field, &self.cfg.bc)?);
        }
        Ok(self.op.get().expect("set"))
    }

    fn a(&self) -> Result<&SpectralFactorization> {
        if self.f_a.get().is_none() {
            let _ = self.f_a.set(factorize(self.op()?)?);
        }
        Ok(self.f_a.get().expect("set"))
    }

    fn b(&self) -> Result<&SpectralFactorization> {
        if self.f_b.get().is_none() {
            let _ = self.f_b.set(factorize(&assemble(&self.field_b, &self.cfg.bc)?)?);
        }
        Ok(self.f_b.get().expect("set"))
    }

    /// Seeded random test functions; `offset` separates independent families.
    fn functions(&self, count: usize, offset: u64) -> Vec<GridFunction> {
        let base = self.cfg.seed.wrapping_mul(1_000_003).wrapping_add(offset * 10_007);
        (0..count as u64)
            .map(|k| random_test_function(&self.grid, base.wrapping_add(k), Smoothness::Smooth))
            .collect()
    }

    fn time_grid(&self, f_l: &SpectralFactorization) -> Result<TimeGrid> {
        TimeGrid::for_spectrum(f_l, self.cfg.params.t_grid.per_decade)
    }
}

pub fn run_kind(kind: ExperimentKind, s: &Setup) -> Result<Outcome> {
    match kind {
        ExperimentKind::Ellipticity => ellipticity(s),
        ExperimentKind::Semigroup => semigroup(s),
        ExperimentKind::ImaginaryPowers => imaginary_powers(s),
        ExperimentKind::Maximal => maximal(s),
        ExperimentKind::Ergodic => ergodic(s),
        ExperimentKind::Difference => difference(s),
        ExperimentKind::Duhamel => duhamel(s),
        ExperimentKind::Transfer => transfer(s),
        ExperimentKind::Subordinate => subordinate(s),
        ExperimentKind::SquareFunction => square_function(s),
        ExperimentKind::TwoParam => two_param(s),
        ExperimentKind::FullSuite => {
            let mut out = Outcome::default();
            for k in ExperimentKind::SUITE {
                let o = run_kind(k, s).map_err(|e| Error::Domain(format!("{k}: {e}")))?;
                out.merge(k.name(), o);
            }
            Ok(out)
        }
    }
}

fn distinct_cells(field: &MatrixField) -> Vec<ComplexMatrix> {
    let mut out: Vec<ComplexMatrix> = Vec::new();
    for c in field.cells() {
        if !out.contains(c) {
            out.push(c.clone());
        }
    }
    out
}

fn ellipticity(s: &Setup) -> Result<Outcome> {
    use semimax_core::ellipticity::{conjugate_exponent, delta_p};
    let mut o = Outcome::default();
    let lambda = s.field.lambda()?;
    o.value("lambda", lambda);
    o.value("capital_lambda", s.field.capital_lambda()?);
    o.check(Check::new("lambda_positive", lambda, crate::record::Relation::AtLeast, f64::MIN_POSITIVE));
    let mut gap2: f64 = 0.0;
    let mut dual: f64 = 0.0;
    for a in distinct_cells(&s.field) {
        let l = semimax_core::ellipticity::lambda_of(&a)?;
        gap2 = gap2.max((delta_p(&a, 2.0)? - l).abs());
        for &p in &s.cfg.params.p {
            dual = dual.max((delta_p(&a, p)? - delta_p(&a, conjugate_exponent(p))?).abs());
        }
    }
    o.check(Check::at_most("delta_2_equals_lambda", gap2, s.cfg.tolerances.identity));
    o.check(Check::at_most("delta_p_duality", dual, s.cfg.tolerances.identity));
    if lambda > 0.0 {
        let r = s.field.p_range(1e-10)?;
        o.value("p_min", r.p_min);
        if r.p_max.is_finite() {
            o.value("p_max", r.p_max);
        }
        for &p in &s.cfg.params.p {
            if !r.contains(p) {
                o.warnings.push(format!("p = {p} lies outside the p-ellipticity range ({}, {})", r.p_min, r.p_max));
            }
        }
    }
    let mut csv = String::from("p,delta_p\n");
    for k in 0..=40 {
        let p = 1.0 + 0.05 * k as f64 * k as f64 / 4.0;
        let p = if k == 0 { 1.0 + 1e-9 } else { p };
        csv.push_str(&format!("{p:.17e},{:.17e}\n", s.field.delta_p(p)?));
    }
    for &p in &s.cfg.params.p {
        o.value(format!("delta_p[{p}]"), s.field.delta_p(p)?);
    }
    o.artifacts.push(("ellipticity.csv".into(), csv));
    Ok(o)
}

fn log_times(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (n - 1) as f64)).collect()
}

fn semigroup(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    let f_a = s.a()?;
    let ts = log_times(-2.0 - f_a.max_modulus().log10(), 2.0 - f_a.min_modulus().log10(), 25);
    let scan = semigroup_contractivity_scan(s.op()?, &ts)?;
    let worst = scan.iter().map(|&(_, n)| n).fold(0.0, f64::max);
    o.value("max_semigroup_norm", worst);
    o.check(Check::at_most("contractivity", worst - 1.0, s.cfg.tolerances.contraction));
    let sector = s.field.sector_angle()?;
    let arg = f_a.max_argument();
    o.value("sector_bound", sector);
    o.value("max_spectral_argument", arg);
    o.check(Check::at_most("sectoriality", arg - sector, s.cfg.tolerances.sector));
    let mut csv = String::from("t,norm\n");
    for (t, n) in &scan {
        csv.push_str(&format!("{t:.17e},{n:.17e}\n"));
    }
    o.artifacts.push(("semigroup.csv".into(), csv));
    Ok(o)
}

/// `theta` and the real base field when the field is `e^{i theta}` times a
/// real one.
fn rotation_of(field: &MatrixField) -> Option<(f64, MatrixField)> {
    let FieldTag::RotatedReal { theta } = *field.tag() else { return None };
    let base = field.scale(Complex64::from_polar(1.0, -theta));
    let cells = base
        .cells()
        .iter()
        .map(|c| ComplexMatrix::from_fn(c.dim(), |i, j| Complex64::new(c[(i, j)].re, 0.0)))
        .collect();
    let base = MatrixField::custom(field.grid(), cells).ok()?;
    Some((theta, base))
}

fn is_symmetric(field: &MatrixField) -> bool {
    field.cells().iter().all(|c| (0..c.dim()).all(|i| (0..c.dim()).all(|j| c[(i, j)] == c[(j, i)])))
}

fn imaginary_powers(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    let p = &s.cfg.params;
    let us: Vec<f64> = (0..p.u_samples).map(|k| -p.u_max + 2.0 * p.u_max * k as f64 / (p.u_samples - 1) as f64).collect();
    let ipb = imaginary_power_scan(s.a()?, &us)?;
    o.value("theta_fit", ipb.fitted_theta);
    o.value("constant_fit", ipb.fitted_constant);
    o.check(Check::below("theta_fit_below_right_angle", ipb.fitted_theta, FRAC_PI_2));
    o.check(Check::at_most("envelope_dominates", ipb.envelope_violation(), 1e-9));
    if let Some((theta, base)) = rotation_of(&s.field) {
        if is_symmetric(&base) {
            // ||L^{iu}|| = e^{-theta u} exactly, which is e^{theta |u|} for u <= 0
            let gap = ipb
                .samples
                .iter()
                .map(|&(u, v)| (v / (-theta * u).exp() - 1.0).abs())
                .fold(0.0, f64::max);
            o.check(Check::at_most("rotation_exact_norms", gap, s.cfg.tolerances.transfer));
            o.check(Check::at_most("rotation_exact_theta", (ipb.fitted_theta - theta).abs(), s.cfg.tolerances.transfer));
        }
    }
    let mut csv = String::from("u,norm\n");
    for (u, v) in &ipb.samples {
        csv.push_str(&format!("{u:.17e},{v:.17e}\n"));
    }
    o.artifacts.push(("imaginary_powers.csv".into(), csv));
    Ok(o)
}

fn p_label(p: f64) -> String {
    format!("{p}")
}

fn norm_search(
    s: &Setup,
    o: &mut Outcome,
    label: &str,
    f_l: &SpectralFactorization,
    scanner: &dyn Fn(&GridFunction, f64, &TimeGrid) -> Result<MaximalScan>,
) -> Result<()> {
    let tg = s.time_grid(f_l)?;
    let initial = s.functions(s.cfg.params.functions, 1);
    for &p in &s.cfg.params.p {
        let pl = p_label(p);
        let scan_p = |f: &GridFunction| scanner(f, p, &tg);
        let opts = SearchOptions { steps: s.cfg.params.greedy_steps, seed: s.cfg.seed, ..Default::default() };
        let est = operator_norm_estimate(&scan_p, f_l.layout(), &initial, &opts)?;
        o.value(format!("{label}_estimate[p={pl}]"), est.estimate);
        o.value(format!("{label}_initial_max[p={pl}]"), est.initial_max);
        o.value(format!("{label}_accepted[p={pl}]"), est.accepted as f64);
        o.check(Check::at_least(format!("{label}_ratio_at_least_one[p={pl}]"), est.estimate, 1.0 - 1e-12));
        let refined = with_refinement(scan_p(&est.worst_f)?, |g| scanner(&est.worst_f, p, g))?;
        let sens = refined.grid_sensitivity.unwrap_or(0.0);
        o.value(format!("{label}_grid_sensitivity[p={pl}]"), sens);
        if sens > s.cfg.tolerances.grid_slack {
            o.warnings.push(format!("{label} at p = {p}: ratio changes by {sens:.3e} under time-grid refinement"));
        }
        o.artifacts.push((format!("{label}_sup_p{pl}.csv"), refined.per_node_sup.to_csv()));
    }
    Ok(())
}

fn warn_outside_range(s: &Setup, o: &mut Outcome) -> Result<()> {
    if s.field.lambda()? > 0.0 {
        let r = s.field.p_range(1e-10)?;
        for &p in &s.cfg.params.p {
            if !r.contains(p) {
                o.warnings.push(format!("p = {p} lies outside the p-ellipticity range ({}, {})", r.p_min, r.p_max));
            }
        }
    }
    Ok(())
}

fn maximal(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    warn_outside_range(s, &mut o)?;
    let f_l = s.a()?;
    norm_search(s, &mut o, "maximal", f_l, &|f, p, g| maximal_scan(f_l, f, p, g))?;
    Ok(o)
}

fn ergodic(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    warn_outside_range(s, &mut o)?;
    let f_l = s.a()?;
    let mut worst: f64 = 0.0;
    for f in s.functions(3, 2) {
        for &t in &s.cfg.params.times {
            worst = worst.max(ergodic_comparison_residual(f_l, &f, t, 400)?);
        }
    }
    o.check(Check::at_most("ergodic_comparison", worst, s.cfg.tolerances.ergodic));
    norm_search(s, &mut o, "ergodic", f_l, &|f, p, g| ergodic_scan(f_l, f, p, g))?;
    Ok(o)
}

fn difference(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    let (a, b) = (s.a()?, s.b()?);
    let tg = TimeGrid::for_pair(a, b, s.cfg.params.t_grid.per_decade)?;
    let fs = s.functions(s.cfg.params.functions, 3);
    for &p in &s.cfg.params.p {
        let mut ratio: f64 = 0.0;
        let mut split: f64 = 0.0;
        for f in &fs {
            let scan = difference_scan(a, b, f, p, &tg)?;
            ratio = ratio.max(scan.ratio);
            let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            split = split.max(scan.split_violation.unwrap_or(0.0) / scale);
        }
        let pl = p_label(p);
        o.value(format!("difference_ratio[p={pl}]"), ratio);
        o.check(Check::below(format!("difference_ratio_finite[p={pl}]"), ratio, f64::INFINITY));
        o.check(Check::at_most(format!("split_bound[p={pl}]"), split, s.cfg.tolerances.identity));
    }
    if let Some((theta, base)) = rotation_of(&s.field) {
        let fb = factorize(&assemble(&base, &s.cfg.bc)?)?;
        let tgb = TimeGrid::for_spectrum(&fb, s.cfg.params.t_grid.per_decade)?;
        let mut gap: f64 = 0.0;
        for f in fs.iter().take(5) {
            gap = gap.max(rotation_equivalence_gap(a, &fb, theta, f, &tgb.times())?);
        }
        o.check(Check::at_most("rotation_equivalence", gap, s.cfg.tolerances.rotation));
    }
    Ok(o)
}

fn kernel_free(s: &Setup) -> Result<()> {
    if s.cfg.bc.is_pure_neumann() {
        return Err(Error::Domain("transfer experiments need a Dirichlet part in the boundary condition".into()));
    }
    Ok(())
}

fn duhamel(s: &Setup) -> Result<Outcome> {
    kernel_free(s)?;
    let mut o = Outcome::default();
    let (a, b) = (s.a()?, s.b()?);
    let fs = s.functions(3, 4);
    let mut mass_gap: f64 = 0.0;
    let mut direct: f64 = 0.0;
    let mut factorized: f64 = 0.0;
    for &alpha in &s.cfg.params.alpha {
        for t in [0.1, 1.0, 10.0] {
            for al in [alpha, 1.0 - alpha] {
                let m = BetaMeasure::new(al, t)?;
                mass_gap = mass_gap.max((m.mass(64)? - m.exact_mass()).abs() / m.exact_mass());
            }
        }
        let plan = build_transfer(a, b, alpha, &[2.0])?;
        for &t in &s.cfg.params.times {
            for f in &fs {
                let r = duhamel_report(&plan, f, t, s.cfg.params.duhamel_nodes)?;
                direct = direct.max(r.direct_residual);
                factorized = factorized.max(r.factorized_gap());
            }
        }
    }
    o.check(Check::at_most("beta_mass", mass_gap, s.cfg.tolerances.beta_mass));
    o.check(Check::at_most("duhamel_direct", direct, s.cfg.tolerances.duhamel));
    o.check(Check::at_most("duhamel_factorized", factorized, s.cfg.tolerances.duhamel));
    Ok(o)
}

fn transfer(s: &Setup) -> Result<Outcome> {
    kernel_free(s)?;
    let mut o = Outcome::default();
    let (a, b) = (s.a()?, s.b()?);
    let fs = s.functions(3, 5);
    let mut csv = String::from("alpha_max,alpha,u_norm,v_norm\n");
    let mut identities: f64 = 0.0;
    let mut dual: f64 = 0.0;
    let mut sweep_sup: f64 = 0.0;
    for &alpha in &s.cfg.params.alpha {
        let plan = build_transfer(a, b, alpha, &s.cfg.params.p)?;
        for f in &fs {
            identities = plan.identity_residuals(f)?.into_iter().fold(identities, f64::max);
            dual = dual.max(plan.dual_path_residual(f)?);
        }
        let sum = plan.summary();
        sweep_sup = sweep_sup.max(sum.sweep_sup_u).max(sum.sweep_sup_v);
        o.value(format!("v_route_gap[alpha={alpha}]"), sum.v_route_gap);
        for n in &sum.norms {
            o.value(format!("u_norm[alpha={alpha},p={}]", n.p), n.u_norm);
            o.value(format!("v_norm[alpha={alpha},p={}]", n.p), n.v_norm);
        }
        for pt in &sum.sweep {
            csv.push_str(&format!("{alpha},{:.17e},{:.17e},{:.17e}\n", pt.alpha, pt.u_norm, pt.v_norm));
        }
    }
    o.value("sweep_sup", sweep_sup);
    o.check(Check::at_most("transfer_identities", identities, s.cfg.tolerances.transfer));
    o.check(Check::at_most("dual_path", dual, s.cfg.tolerances.dual_path));
    o.check(Check::below("sweep_finite", sweep_sup, f64::INFINITY));
    o.artifacts.push(("transfer_sweep.csv".into(), csv));
    Ok(o)
}

fn symbol_label(sym: &Symbol) -> &'static str {
    match sym {
        Symbol::Psi { .. } => "psi",
        Symbol::MTheta { .. } => "m_theta",
        _ => "symbol",
    }
}

fn subordinate(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    let p = &s.cfg.params;
    let symbols = [Symbol::Psi { beta: 1.0 }, Symbol::MTheta { theta: p.theta, sign: RotationSign::Plus }];
    let mut closed: f64 = 0.0;
    for sym in &symbols {
        for k in 0..=40 {
            let u = -10.0 + 0.5 * k as f64;
            closed = closed.max((mellin_transform(sym, u)? - mellin_brute_force(sym, u)?).norm());
        }
    }
    o.check(Check::at_most("mellin_closed_forms", closed, s.cfg.tolerances.mellin));
    let stirling = (stirling_ratio(1.0, 50.0) - 1.0).abs().max((stirling_ratio(1.0, -50.0) - 1.0).abs());
    o.check(Check::at_most("stirling_ratio", stirling, 0.05));

    let f_l = s.a()?;
    let ipb = imaginary_power_scan(f_l, &(0..=20).map(|k| k as f64).collect::<Vec<_>>())?;
    let fs = s.functions(2, 6);
    let mass = f_l.mass();
    // geometric middle of the spectral time scales
    let t = 1.0 / (f_l.min_modulus() * f_l.max_modulus()).sqrt();
    let mut us = p.truncation_u.clone();
    us.sort_by(f64::total_cmp);
    for sym in &symbols {
        let label = symbol_label(sym);
        let mut errs = Vec::new();
        for &u in &us {
            let mut worst: f64 = 0.0;
            for f in &fs {
                let rec = cowling_reconstruct(f_l, sym, t, f, u, p.n_quad, f64::INFINITY)?;
                let x = f_l.layout().restrict(f)?;
                let direct = f_l.apply(&MultiplierSpec::new(*sym, t)?, &x, KernelMode::Full)?;
                let r = f_l.layout().restrict(&rec)?;
                let d: Vec<Complex64> = r.iter().zip(&direct).map(|(a, b)| a - b).collect();
                let den = semimax_core::linalg::weighted_norm(&direct, mass).max(f64::MIN_POSITIVE);
                worst = worst.max(semimax_core::linalg::weighted_norm(&d, mass) / den);
            }
            o.value(format!("cowling_error[{label},U={u}]"), worst);
            errs.push(worst);
        }
        o.check(Check::at_most(format!("cowling_{label}"), *errs.last().expect("nonempty"), s.cfg.tolerances.cowling));
        let rise = errs.windows(2).map(|w| (w[1] - w[0]).max(0.0)).fold(0.0, f64::max);
        o.check(Check::at_most(format!("cowling_{label}_monotone"), rise, 1e-12));
        match subordination_bound(sym, &ipb) {
            Ok(b) => o.value(format!("subordination_bound[{label}]"), b),
            Err(e) => o.warnings.push(format!("subordination bound for {label}: {e}")),
        }
        let table = MellinTable::new(*sym, *us.last().expect("nonempty"), p.n_quad.min(2000))?;
        o.artifacts.push((format!("mellin_{label}.csv"), table.to_csv()));
    }
    Ok(o)
}

/// `sup_x G(x) / ||x||` over seeded random `x` at the given resolution.
fn square_constant(s: &Setup, f_l: &SpectralFactorization, grid: &Grid) -> Result<f64> {
    let gamma = s.cfg.params.gamma;
    let base = s.cfg.seed.wrapping_mul(1_000_003).wrapping_add(7 * 10_007);
    let mut c: f64 = 0.0;
    for k in 0..s.cfg.params.functions.max(50) as u64 {
        let f = random_test_function(grid, base.wrapping_add(k), Smoothness::Smooth);
        let x = f_l.layout().restrict(&f)?;
        let n = semimax_core::linalg::weighted_norm(&x, f_l.mass());
        if n > 0.0 {
            c = c.max(square_function_vec(f_l, gamma, &x)? / n);
        }
    }
    Ok(c)
}

fn square_function(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    let f_l = s.a()?;
    let gamma = s.cfg.params.gamma;
    // eigenvector of the smallest nonzero eigenvalue: G^2 = Gamma(2 gamma) (|lambda| / (2 Re lambda))^{2 gamma}
    let k = (0..f_l.len())
        .filter(|&k| Some(k) != f_l.kernel_index())
        .min_by(|&i, &j| f_l.eigenvalues()[i].norm().total_cmp(&f_l.eigenvalues()[j].norm()))
        .ok_or_else(|| Error::Domain("operator has no nonzero eigenvalue".into()))?;
    let lam = f_l.eigenvalues()[k];
    let mut v = semimax_core::linalg::column(f_l.right_eigenvectors().as_ref(), k);
    let nrm = semimax_core::linalg::weighted_norm(&v, f_l.mass());
    v.iter_mut().for_each(|z| *z /= nrm);
    let g = square_function_vec(f_l, gamma, &v)?;
    let exact = (ln_gamma_real(2.0 * gamma) + 2.0 * gamma * (lam.norm() / (2.0 * lam.re)).ln()).exp();
    o.value("eigenvector_g_squared", g * g);
    o.check(Check::at_most("closed_form", (g * g - exact).abs() / exact, s.cfg.tolerances.square_function));

    let c1 = square_constant(s, f_l, &s.grid)?;
    let fine_cfg = s.cfg.at_resolution(2 * s.grid.nodes_per_axis()[0] - 1);
    let fine = Setup::new(&fine_cfg).map_err(|e| Error::Domain(e.to_string()))?;
    let c2 = square_constant(s, fine.a()?, &fine.grid)?;
    o.value("bound_constant", c1);
    o.value("bound_constant_refined", c2);
    o.check(Check::at_most("bound_constant_stability", (c2 - c1).abs() / c1, s.cfg.tolerances.stability));
    Ok(o)
}

fn two_param(s: &Setup) -> Result<Outcome> {
    let mut o = Outcome::default();
    let (a1, a2) = (s.a()?, s.b()?);
    let per_decade = (s.cfg.params.t_grid.per_decade / 4).max(2);
    let g1 = TimeGrid::for_spectrum(a1, per_decade)?;
    let g2 = TimeGrid::for_spectrum(a2, per_decade)?;
    let fs = s.functions(s.cfg.params.functions, 8);
    for &p in &s.cfg.params.p {
        let mut ratio: f64 = 0.0;
        let mut dom: Option<f64> = None;
        for f in &fs {
            let scan = two_parameter_scan(a1, a2, f, p, &g1, &g2)?;
            ratio = ratio.max(scan.ratio);
            if let Some(d) = scan.domination_violation {
                let scale = f.values.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
                dom = Some(dom.unwrap_or(0.0).max(d / scale));
            }
        }
        let pl = p_label(p);
        o.value(format!("two_param_ratio[p={pl}]"), ratio);
        o.check(Check::below(format!("two_param_ratio_finite[p={pl}]"), ratio, f64::INFINITY));
        if let Some(d) = dom {
            o.check(Check::at_most(format!("domination[p={pl}]"), d, s.cfg.tolerances.grid_slack));
        }
    }
    Ok(o)
}
