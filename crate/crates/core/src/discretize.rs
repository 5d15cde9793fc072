//! Assembly of `-div(A grad)` on a grid.
//!
//! Gradients live on cells. In 1D each cell carries one difference quotient.
//! In 2D each cell carries four gradients, one per corner, built from the two
//! cell edges meeting at that corner; averaging over corners avoids the
//! checkerboard null mode of a single cell-centred gradient. With `G_s` the
//! sampled gradients, `w_s` their weights and `M` the trapezoid mass,
//!
//! ```text
//! K = sum_s w_s G_s^T A_c G_s,    L = M^{-1} K,
//! ```
//!
//! so that `<L u, u>_M = sum_s w_s <A G_s u, G_s u>` exactly. Dirichlet nodes
//! are removed from the unknowns; the remaining boundary is natural.

use crate::ellipticity::{self, ComplexMatrix, PRange};
use crate::error::{Error, Result};
use crate::grid::{BoundaryCondition, Grid, GridFunction};
use crate::linalg::{self, CMat, ZERO};
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum FieldTag {
    Constant,
    RotatedReal { theta: f64 },
    Checkerboard { tiles: usize },
    Custom,
}

/// One coefficient matrix per grid cell.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixField {
    grid: Grid,
    cells: Vec<ComplexMatrix>,
    tag: FieldTag,
}

impl MatrixField {
    pub fn custom(grid: &Grid, cells: Vec<ComplexMatrix>) -> Result<MatrixField> {
        Self::tagged(grid, cells, FieldTag::Custom)
    }

    fn tagged(grid: &Grid, cells: Vec<ComplexMatrix>, tag: FieldTag) -> Result<MatrixField> {
        if cells.len() != grid.cell_count() {
            return Err(Error::Dimension(format!(
                "{} cell matrices for {} cells",
                cells.len(),
                grid.cell_count()
            )));
        }
        if let Some(m) = cells.iter().find(|m| m.dim() != grid.dim()) {
            return Err(Error::Dimension(format!(
                "{}x{} coefficient on a {}D grid",
                m.dim(),
                m.dim(),
                grid.dim()
            )));
        }
        Ok(MatrixField { grid: grid.clone(), cells, tag })
    }

    pub fn constant(grid: &Grid, a: &ComplexMatrix) -> Result<MatrixField> {
        Self::tagged(grid, vec![a.clone(); grid.cell_count()], FieldTag::Constant)
    }

    /// `e^{i theta} B` for a real matrix `B`.
    pub fn rotated_real(grid: &Grid, b: &ComplexMatrix, theta: f64) -> Result<MatrixField> {
        if !b.is_real() {
            return Err(Error::Domain("rotated_real expects a real matrix".into()));
        }
        let a = b.scale(Complex64::from_polar(1.0, theta));
        Self::tagged(grid, vec![a; grid.cell_count()], FieldTag::RotatedReal { theta })
    }

    /// `a1` and `a2` alternating on `tiles` equal tiles per axis. Tiles are
    /// physical, so refining the grid keeps the same continuum field.
    pub fn checkerboard(grid: &Grid, a1: &ComplexMatrix, a2: &ComplexMatrix, tiles: usize) -> Result<MatrixField> {
        if tiles == 0 {
            return Err(Error::Domain("checkerboard needs at least one tile".into()));
        }
        let ext = grid.extents().to_vec();
        let cells = (0..grid.cell_count())
            .map(|c| {
                let x = grid.cell_center(c);
                let parity: usize = x
                    .iter()
                    .zip(&ext)
                    .map(|(xi, l)| ((xi / l * tiles as f64).floor() as usize).min(tiles - 1))
                    .sum();
                if parity % 2 == 0 { a1.clone() } else { a2.clone() }
            })
            .collect();
        Self::tagged(grid, cells, FieldTag::Checkerboard { tiles })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> ComplexMatrix) -> Result<MatrixField> {
        let cells = (0..grid.cell_count()).map(|c| f(&grid.cell_center(c))).collect();
        Self::custom(grid, cells)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn cells(&self) -> &[ComplexMatrix] {
        &self.cells
    }

    pub fn tag(&self) -> &FieldTag {
        &self.tag
    }

    /// Pointwise adjoint field `A*`.
    pub fn adjoint(&self) -> MatrixField {
        MatrixField {
            grid: self.grid.clone(),
            cells: self.cells.iter().map(|a| a.adjoint()).collect(),
            tag: match self.tag {
                FieldTag::RotatedReal { theta } => FieldTag::RotatedReal { theta: -theta },
                ref t => t.clone(),
            },
        }
    }

    pub fn scale(&self, c: Complex64) -> MatrixField {
        MatrixField {
            grid: self.grid.clone(),
            cells: self.cells.iter().map(|a| a.scale(c)).collect(),
            tag: FieldTag::Custom,
        }
    }

    pub fn is_real(&self) -> bool {
        self.cells.iter().all(|a| a.is_real())
    }

    /// Essential infimum of the ellipticity constant over cells.
    pub fn lambda(&self) -> Result<f64> {
        self.min_over_cells(ellipticity::lambda_of)
    }

    pub fn capital_lambda(&self) -> Result<f64> {
        self.cells
            .iter()
            .map(ellipticity::capital_lambda_of)
            .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
    }

    pub fn delta_p(&self, p: f64) -> Result<f64> {
        self.min_over_cells(|a| ellipticity::delta_p(a, p))
    }

    fn min_over_cells(&self, f: impl Fn(&ComplexMatrix) -> Result<f64>) -> Result<f64> {
        let mut distinct: Vec<&ComplexMatrix> = Vec::new();
        for c in &self.cells {
            if !distinct.contains(&c) {
                distinct.push(c);
            }
        }
        distinct.into_iter().map(f).try_fold(f64::INFINITY, |m, v| v.map(|v| m.min(v)))
    }

    pub fn p_range(&self, tol: f64) -> Result<PRange> {
        let mut distinct: Vec<&ComplexMatrix> = Vec::new();
        for c in &self.cells {
            if !distinct.contains(&c) {
                distinct.push(c);
            }
        }
        let mut range: Option<PRange> = None;
        for a in distinct {
            let r = ellipticity::p_ellipticity_range(a, tol)?;
            range = Some(match range {
                None => r,
                Some(q) => q.intersect(&r),
            });
        }
        Ok(range.expect("fields have at least one cell"))
    }

    /// Bound on the half-angle of the sector containing the spectrum.
    pub fn sector_angle(&self) -> Result<f64> {
        let l = self.lambda()?;
        let cl = self.capital_lambda()?;
        if l <= 0.0 {
            return Err(Error::NotElliptic { lambda: l });
        }
        Ok((l / cl).clamp(-1.0, 1.0).acos())
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Names of the built-in coefficient fields.
pub const BUILTIN_FIELDS: [&str; 5] = [
    "identity",
    "real_symmetric",
    "real_nonsymmetric",
    "rotated",
    "complex_checkerboard",
];

/// Rotation angle of the built-in `rotated` field.
pub const BUILTIN_ROTATION: f64 = PI / 6.0;

/// The two cell matrices of the built-in complex checkerboard. In 1D they are
/// scalars with different phases, in 2D non-commuting complex matrices; in
/// neither case is the field a rotation of a real field.
pub fn checkerboard_pair(dim: usize) -> (ComplexMatrix, ComplexMatrix) {
    if dim == 1 {
        (
            ComplexMatrix::from_row_major(1, vec![Complex64::from_polar(1.0, PI / 5.0)]).unwrap(),
            ComplexMatrix::from_row_major(1, vec![Complex64::from_polar(2.0, -PI / 8.0)]).unwrap(),
        )
    } else {
        (
            ComplexMatrix::from_row_major(2, vec![c(1.0, 0.3), c(0.2, 0.4), c(-0.1, 0.2), c(1.5, -0.2)]).unwrap(),
            ComplexMatrix::from_row_major(2, vec![c(2.0, -0.5), c(0.0, -0.3), c(0.4, 0.1), c(1.0, 0.4)]).unwrap(),
        )
    }
}

pub const BUILTIN_TILES: usize = 8;

fn real_symmetric(dim: usize) -> ComplexMatrix {
    if dim == 1 {
        ComplexMatrix::from_real(1, &[1.5]).unwrap()
    } else {
        ComplexMatrix::from_real(2, &[2.0, 0.5, 0.5, 1.0]).unwrap()
    }
}

pub fn builtin_field(name: &str, grid: &Grid) -> Result<MatrixField> {
    let d = grid.dim();
    match name {
        "identity" => MatrixField::constant(grid, &ComplexMatrix::identity(d)),
        "real_symmetric" => {
            // varies across the domain so the operator is not a multiple of
            // the Laplacian
            let b = real_symmetric(d);
            MatrixField::checkerboard(grid, &b, &b.scale(c(0.5, 0.0)), BUILTIN_TILES)
        }
        "real_nonsymmetric" => {
            let b = if d == 1 {
                ComplexMatrix::from_real(1, &[0.7]).unwrap()
            } else {
                ComplexMatrix::from_real(2, &[1.5, 0.8, -0.3, 1.0]).unwrap()
            };
            let b2 = if d == 1 {
                ComplexMatrix::from_real(1, &[2.0]).unwrap()
            } else {
                ComplexMatrix::from_real(2, &[1.0, -0.5, 0.4, 1.2]).unwrap()
            };
            MatrixField::checkerboard(grid, &b, &b2, BUILTIN_TILES)
        }
        "rotated" => MatrixField::rotated_real(grid, &real_symmetric(d), BUILTIN_ROTATION),
        "complex_checkerboard" => {
            let (a1, a2) = checkerboard_pair(d);
            MatrixField::checkerboard(grid, &a1, &a2, BUILTIN_TILES)
        }
        other => Err(Error::Domain(format!(
            "unknown field '{other}', expected one of {BUILTIN_FIELDS:?}"
        ))),
    }
}

/// The discrete operator restricted to the free (non-Dirichlet) nodes.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    matrix: CMat,
    stiffness: CMat,
    layout: Layout,
    field: MatrixField,
}

/// Where the unknowns of an operator sit on its grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub grid: Grid,
    pub bc: BoundaryCondition,
    /// Grid indices of the unknowns.
    pub free: Vec<usize>,
    /// Trapezoid mass of each unknown.
    pub mass: Vec<f64>,
    pub kernel_dim: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.free.is_empty()
    }

    pub fn restrict(&self, f: &GridFunction) -> Result<Vec<Complex64>> {
        if f.grid != self.grid {
            return Err(Error::GridMismatch("function and operator grids differ".into()));
        }
        Ok(self.free.iter().map(|&k| f.values[k]).collect())
    }

    /// Embeds unknowns into a grid function, zero on Dirichlet nodes.
    pub fn extend(&self, x: &[Complex64]) -> GridFunction {
        let mut g = GridFunction::zeros(&self.grid);
        for (&k, v) in self.free.iter().zip(x) {
            g.values[k] = *v;
        }
        g
    }

    /// Zeroes a function on Dirichlet nodes.
    pub fn admissible(&self, f: &GridFunction) -> Result<GridFunction> {
        Ok(self.extend(&self.restrict(f)?))
    }

    pub fn check_same(&self, other: &Layout) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("grids differ".into()));
        }
        if self.bc != other.bc {
            return Err(Error::GridMismatch("boundary conditions differ".into()));
        }
        Ok(())
    }

    /// `M`-weighted `L^p` norm of a vector of unknowns.
    pub fn lp_norm(&self, x: &[Complex64], p: f64) -> Result<f64> {
        crate::grid::lp_norm(x, &self.mass, p)
    }
}

impl DiscreteOperator {
    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    /// `K = M L`, the matrix of the sesquilinear form.
    pub fn stiffness(&self) -> &CMat {
        &self.stiffness
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn field(&self) -> &MatrixField {
        &self.field
    }

    pub fn grid(&self) -> &Grid {
        &self.layout.grid
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.layout.bc
    }

    pub fn mass(&self) -> &[f64] {
        &self.layout.mass
    }

    pub fn kernel_dim(&self) -> usize {
        self.layout.kernel_dim
    }

    pub fn len(&self) -> usize {
        self.layout.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layout.is_empty()
    }

    pub fn is_real(&self) -> bool {
        self.field.is_real()
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        linalg::matvec(self.matrix.as_ref(), x)
    }

    /// `<L u, u>_M`.
    pub fn form(&self, u: &[Complex64]) -> Complex64 {
        linalg::weighted_inner(&self.apply(u), u, &self.layout.mass)
    }

    /// Adjoint in `L^2(M)`: `M^{-1} L^H M`.
    pub fn weighted_adjoint(&self) -> CMat {
        linalg::weighted_adjoint(self.matrix.as_ref(), &self.layout.mass)
    }

    /// Dense export, one row per matrix row: `re,im` pairs separated by
    /// commas.
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut out = String::new();
        for i in 0..n {
            let row: Vec<String> = (0..n)
                .map(|j| format!("{:.17e},{:.17e}", self.matrix[(i, j)].re, self.matrix[(i, j)].im))
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Sampled cell gradients: `(weight, [(node, coefficient)] per axis)`.
type Stencil = Vec<(f64, Vec<Vec<(usize, f64)>>)>;

fn cell_stencil(grid: &Grid, cell: usize) -> Stencil {
    let h = grid.spacing();
    let n = grid.nodes_per_axis();
    if grid.dim() == 1 {
        let (i0, i1) = (cell, cell + 1);
        return vec![(h[0], vec![vec![(i0, -1.0 / h[0]), (i1, 1.0 / h[0])]])];
    }
    let cx = n[0] - 1;
    let (ix, iy) = (cell % cx, cell / cx);
    let n00 = grid.index(ix, iy);
    let n10 = grid.index(ix + 1, iy);
    let n01 = grid.index(ix, iy + 1);
    let n11 = grid.index(ix + 1, iy + 1);
    let (hx, hy) = (h[0], h[1]);
    let dx_bottom = vec![(n00, -1.0 / hx), (n10, 1.0 / hx)];
    let dx_top = vec![(n01, -1.0 / hx), (n11, 1.0 / hx)];
    let dy_left = vec![(n00, -1.0 / hy), (n01, 1.0 / hy)];
    let dy_right = vec![(n10, -1.0 / hy), (n11, 1.0 / hy)];
    let w = 0.25 * hx * hy;
    vec![
        (w, vec![dx_bottom.clone(), dy_left.clone()]),
        (w, vec![dx_bottom, dy_right.clone()]),
        (w, vec![dx_top.clone(), dy_left]),
        (w, vec![dx_top, dy_right]),
    ]
}

pub fn assemble(field: &MatrixField, bc: &BoundaryCondition) -> Result<DiscreteOperator> {
    let grid = field.grid();
    let mask = bc.dirichlet_mask(grid)?;
    let nn = grid.node_count();
    let mut k_full = Mat::<Complex64>::zeros(nn, nn);
    for (cell, a) in field.cells().iter().enumerate() {
        for (w, grads) in cell_stencil(grid, cell) {
            for (ia, ga) in grads.iter().enumerate() {
                for (ib, gb) in grads.iter().enumerate() {
                    let coef = a[(ia, ib)] * w;
                    if coef == ZERO {
                        continue;
                    }
                    for &(i, ci) in ga {
                        for &(j, cj) in gb {
                            k_full[(i, j)] += coef * (ci * cj);
                        }
                    }
                }
            }
        }
    }
    let free: Vec<usize> = (0..nn).filter(|&k| !mask[k]).collect();
    if free.is_empty() {
        return Err(Error::Dimension("no free nodes left after Dirichlet elimination".into()));
    }
    let weights = grid.weights();
    let mass: Vec<f64> = free.iter().map(|&k| weights[k]).collect();
    let n = free.len();
    let stiffness = Mat::from_fn(n, n, |i, j| k_full[(free[i], free[j])]);
    let matrix = Mat::from_fn(n, n, |i, j| stiffness[(i, j)] / mass[i]);
    let kernel_dim = usize::from(bc.is_pure_neumann());
    Ok(DiscreteOperator {
        matrix,
        stiffness,
        layout: Layout {
            grid: grid.clone(),
            bc: bc.clone(),
            free,
            mass,
            kernel_dim,
        },
        field: field.clone(),
    })
}

/// Projection onto the null space along the range.
#[derive(Clone, Debug)]
pub struct KernelProjection {
    pub kernel_dim: usize,
    /// `P = 1 m^T / sum(m)` for pure Neumann problems, zero otherwise.
    pub projector: CMat,
}

impl KernelProjection {
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        linalg::matvec(self.projector.as_ref(), x)
    }

    /// `(I - P) x`.
    pub fn complement(&self, x: &[Complex64]) -> Vec<Complex64> {
        let px = self.apply(x);
        x.iter().zip(px).map(|(a, b)| a - b).collect()
    }
}

pub fn kernel_projection(op: &DiscreteOperator) -> KernelProjection {
    let n = op.len();
    let projector = if op.kernel_dim() == 0 {
        Mat::zeros(n, n)
    } else {
        let m = op.mass();
        let total: f64 = m.iter().sum();
        Mat::from_fn(n, n, |_, j| c(m[j] / total, 0.0))
    };
    KernelProjection {
        kernel_dim: op.kernel_dim(),
        projector,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{random_test_function, Face, Smoothness};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn laplacian_1d(n: usize, bc: BoundaryCondition) -> DiscreteOperator {
        let g = Grid::interval(1.0, n).unwrap();
        assemble(&MatrixField::constant(&g, &ComplexMatrix::identity(1)).unwrap(), &bc).unwrap()
    }

    #[test]
    fn dirichlet_laplacian_is_three_point_stencil() {
        let op = laplacian_1d(9, BoundaryCondition::Dirichlet);
        let h = 1.0 / 8.0;
        assert_eq!(op.len(), 7);
        for i in 0..7usize {
            for j in 0..7 {
                let expected = match i.abs_diff(j) {
                    0 => 2.0 / (h * h),
                    1 => -1.0 / (h * h),
                    _ => 0.0,
                };
                assert!((op.matrix()[(i, j)] - c(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn linear_in_coefficient() {
        let g = Grid::rectangle(1.0, 1.0, 6, 5).unwrap();
        let z = c(0.7, 0.4);
        let l1 = assemble(&MatrixField::constant(&g, &ComplexMatrix::identity(2)).unwrap(), &BoundaryCondition::Neumann).unwrap();
        let lz = assemble(
            &MatrixField::constant(&g, &ComplexMatrix::identity(2).scale(z)).unwrap(),
            &BoundaryCondition::Neumann,
        )
        .unwrap();
        for i in 0..l1.len() {
            for j in 0..l1.len() {
                assert!((lz.matrix()[(i, j)] - z * l1.matrix()[(i, j)]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn constants_span_neumann_kernel() {
        for g in [Grid::interval(2.0, 17).unwrap(), Grid::rectangle(1.0, 0.5, 7, 5).unwrap()] {
            let f = builtin_field("complex_checkerboard", &g).unwrap();
            let op = assemble(&f, &BoundaryCondition::Neumann).unwrap();
            let one = vec![c(1.0, 0.0); op.len()];
            assert!(op.apply(&one).iter().all(|v| v.norm() < 1e-10));
            let kp = kernel_projection(&op);
            assert_eq!(kp.kernel_dim, 1);
            assert!(kp.apply(&one).iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-14));
            // mean-zero input
            let x = op.layout().restrict(&random_test_function(&g, 1, Smoothness::Rough)).unwrap();
            let x0 = kp.complement(&x);
            let mean: Complex64 = x0.iter().zip(op.mass()).map(|(v, m)| v * m).sum();
            assert!(mean.norm() < 1e-12);
            assert!(kp.apply(&x0).iter().all(|v| v.norm() < 1e-12));
            // idempotent, annihilated by L
            let p2 = &kp.projector * &kp.projector;
            assert!((&p2 - &kp.projector).norm_max() < 1e-14);
            assert!((op.matrix() * &kp.projector).norm_max() < 1e-9);
        }
        let d = laplacian_1d(9, BoundaryCondition::Dirichlet);
        let kp = kernel_projection(&d);
        assert_eq!(kp.kernel_dim, 0);
        assert_eq!(kp.projector.norm_max(), 0.0);
        let m = laplacian_1d(9, BoundaryCondition::mixed(&[Face::Left]).unwrap());
        assert_eq!(m.kernel_dim(), 0);
        assert_eq!(m.len(), 8);
    }

    #[test]
    fn adjoint_field_gives_adjoint_operator() {
        let g = Grid::rectangle(1.0, 1.0, 6, 6).unwrap();
        let f = builtin_field("complex_checkerboard", &g).unwrap();
        let l = assemble(&f, &BoundaryCondition::Dirichlet).unwrap();
        let ls = assemble(&f.adjoint(), &BoundaryCondition::Dirichlet).unwrap();
        // uniform interior mass: weighted and plain adjoints coincide
        for i in 0..l.len() {
            for j in 0..l.len() {
                assert!((ls.matrix()[(i, j)] - l.matrix()[(j, i)].conj()).norm() < 1e-10);
            }
        }
        let ln = assemble(&f, &BoundaryCondition::Neumann).unwrap();
        let lns = assemble(&f.adjoint(), &BoundaryCondition::Neumann).unwrap();
        assert!((lns.matrix() - ln.weighted_adjoint()).norm_max() < 1e-9);
    }

    #[test]
    fn real_fields_give_real_operators() {
        let g = Grid::rectangle(1.0, 1.0, 5, 5).unwrap();
        let op = assemble(&builtin_field("real_nonsymmetric", &g).unwrap(), &BoundaryCondition::Neumann).unwrap();
        assert!(op.is_real());
        assert!(op.matrix().col_iter().all(|col| col.iter().all(|z| z.im == 0.0)));
        let k = op.stiffness();
        let herm = Mat::from_fn(op.len(), op.len(), |i, j| (k[(i, j)] + k[(j, i)].conj()) * 0.5);
        let ev = herm.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
        assert!(ev.iter().all(|&e| e > -1e-10));
    }

    #[test]
    fn dirichlet_eigenvalue_converges_at_second_order() {
        let mut errors = Vec::new();
        for n in [17, 33, 65] {
            let op = laplacian_1d(n, BoundaryCondition::Dirichlet);
            let ev = op.matrix().eigenvalues().unwrap();
            let lmin = ev.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
            errors.push((lmin - PI * PI).abs());
        }
        for w in errors.windows(2) {
            let rate = w[0] / w[1];
            assert!((rate - 4.0).abs() < 0.2, "rate {rate}");
        }
    }

    #[test]
    fn builtin_fields_are_elliptic() {
        for g in [Grid::interval(1.0, 17).unwrap(), Grid::rectangle(1.0, 1.0, 9, 9).unwrap()] {
            for name in BUILTIN_FIELDS {
                let f = builtin_field(name, &g).unwrap();
                assert!(f.lambda().unwrap() > 0.0, "{name}");
            }
            let cb = builtin_field("complex_checkerboard", &g).unwrap();
            let r = cb.p_range(1e-8).unwrap();
            assert!(r.p_max.is_finite() && r.p_max > 2.5, "{r:?}");
        }
        assert!(builtin_field("nope", &Grid::interval(1.0, 5).unwrap()).is_err());
    }

    #[test]
    fn field_validation() {
        let g = Grid::rectangle(1.0, 1.0, 4, 4).unwrap();
        assert!(MatrixField::constant(&g, &ComplexMatrix::identity(1)).is_err());
        assert!(MatrixField::custom(&g, vec![ComplexMatrix::identity(2); 3]).is_err());
        let cb = builtin_field("complex_checkerboard", &g).unwrap();
        assert!(matches!(cb.tag(), FieldTag::Checkerboard { tiles: 8 }));
    }

    fn field_strategy() -> impl Strategy<Value = (MatrixField, u64)> {
        (any::<u64>(), prop::bool::ANY).prop_map(|(seed, two_d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = if two_d {
                Grid::rectangle(1.0, 1.3, 5, 6).unwrap()
            } else {
                Grid::interval(1.0, 12).unwrap()
            };
            let d = g.dim();
            let cells = (0..g.cell_count()).map(|_| ComplexMatrix::random_elliptic(d, 0.05, &mut rng)).collect();
            (MatrixField::custom(&g, cells).unwrap(), seed)
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn form_identity_and_accretivity((field, seed) in field_strategy()) {
            let bc = BoundaryCondition::mixed(&[Face::Left]).unwrap();
            let op = assemble(&field, &bc).unwrap();
            let u = op.layout().restrict(&random_test_function(field.grid(), seed, Smoothness::Rough)).unwrap();
            let form = op.form(&u);
            // direct evaluation of sum_s w_s <A G_s u, G_s u>
            let full = op.layout().extend(&u).values;
            let mut direct = c(0.0, 0.0);
            let mut energy = 0.0;
            for (cell, a) in field.cells().iter().enumerate() {
                for (w, grads) in cell_stencil(field.grid(), cell) {
                    let g: Vec<Complex64> = grads.iter().map(|gr| gr.iter().map(|&(k, ck)| full[k] * ck).sum()).collect();
                    let ag = a.apply(&g);
                    direct += ag.iter().zip(&g).map(|(x, y)| x * y.conj()).sum::<Complex64>() * w;
                    energy += w * g.iter().map(|z| z.norm_sqr()).sum::<f64>();
                }
            }
            prop_assert!((form - direct).norm() <= 1e-9 * direct.norm().max(1.0));
            let lmin = field.lambda().unwrap();
            prop_assert!(form.re >= lmin * energy - 1e-9 * energy.max(1.0));
        }
    }
}
