//! Tensor-product grids on intervals and rectangles, boundary descriptors and
//! grid functions.
//!
//! Nodes include the boundary and are numbered with the x index running
//! fastest. Quadrature weights are trapezoidal: full cell volume inside,
//! half on faces, a quarter at rectangle corners.

use crate::error::{Error, Result};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    extents: Vec<f64>,
    nodes: Vec<usize>,
}

impl Grid {
    pub fn new(extents: &[f64], nodes_per_axis: &[usize]) -> Result<Grid> {
        if extents.is_empty() || extents.len() > 2 || extents.len() != nodes_per_axis.len() {
            return Err(Error::Dimension(format!(
                "grids are 1D or 2D with one node count per axis (got {} extents, {} counts)",
                extents.len(),
                nodes_per_axis.len()
            )));
        }
        if let Some(&n) = nodes_per_axis.iter().find(|&&n| n < 3) {
            return Err(Error::Domain(format!("need at least 3 nodes per axis, got {n}")));
        }
        if let Some(&l) = extents.iter().find(|&&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::Domain(format!("extent must be positive and finite, got {l}")));
        }
        Ok(Grid {
            extents: extents.to_vec(),
            nodes: nodes_per_axis.to_vec(),
        })
    }

    pub fn interval(length: f64, nodes: usize) -> Result<Grid> {
        Grid::new(&[length], &[nodes])
    }

    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Grid> {
        Grid::new(&[lx, ly], &[nx, ny])
    }

    pub fn dim(&self) -> usize {
        self.extents.len()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.extents
            .iter()
            .zip(&self.nodes)
            .map(|(l, n)| l / (n - 1) as f64)
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn cells_per_axis(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n - 1).collect()
    }

    pub fn cell_count(&self) -> usize {
        self.nodes.iter().map(|n| n - 1).product()
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix + iy * self.nodes[0]
    }

    /// Multi-index of a node.
    pub fn multi_index(&self, k: usize) -> (usize, usize) {
        (k % self.nodes[0], k / self.nodes[0])
    }

    pub fn coordinates(&self, k: usize) -> Vec<f64> {
        let h = self.spacing();
        let (ix, iy) = self.multi_index(k);
        if self.dim() == 1 {
            vec![ix as f64 * h[0]]
        } else {
            vec![ix as f64 * h[0], iy as f64 * h[1]]
        }
    }

    pub fn cell_center(&self, c: usize) -> Vec<f64> {
        let h = self.spacing();
        let cx = self.nodes[0] - 1;
        let (ix, iy) = (c % cx, c / cx);
        if self.dim() == 1 {
            vec![(ix as f64 + 0.5) * h[0]]
        } else {
            vec![(ix as f64 + 0.5) * h[0], (iy as f64 + 0.5) * h[1]]
        }
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    /// Trapezoid weights per node.
    pub fn weights(&self) -> Vec<f64> {
        let axis = |a: usize| -> Vec<f64> {
            let n = self.nodes[a];
            let h = self.extents[a] / (n - 1) as f64;
            (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
        };
        let wx = axis(0);
        if self.dim() == 1 {
            return wx;
        }
        let wy = axis(1);
        let mut w = Vec::with_capacity(self.node_count());
        for y in &wy {
            for x in &wx {
                w.push(x * y);
            }
        }
        w
    }

    /// Faces touched by a node.
    pub fn faces_of(&self, k: usize) -> Vec<Face> {
        let (ix, iy) = self.multi_index(k);
        let mut out = Vec::new();
        if ix == 0 {
            out.push(Face::Left);
        }
        if ix == self.nodes[0] - 1 {
            out.push(Face::Right);
        }
        if self.dim() == 2 {
            if iy == 0 {
                out.push(Face::Bottom);
            }
            if iy == self.nodes[1] - 1 {
                out.push(Face::Top);
            }
        }
        out
    }

    pub fn faces(&self) -> Vec<Face> {
        if self.dim() == 1 {
            vec![Face::Left, Face::Right]
        } else {
            vec![Face::Left, Face::Right, Face::Bottom, Face::Top]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Face {
    Left,
    Right,
    Bottom,
    Top,
}

/// Form domain: functions vanishing on the Dirichlet part of the boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
    Mixed { dirichlet_faces: Vec<Face> },
}

impl BoundaryCondition {
    pub fn mixed(faces: &[Face]) -> Result<BoundaryCondition> {
        if faces.is_empty() {
            return Err(Error::Domain("mixed boundary condition needs a non-empty Dirichlet part".into()));
        }
        let mut faces = faces.to_vec();
        faces.sort();
        faces.dedup();
        Ok(BoundaryCondition::Mixed { dirichlet_faces: faces })
    }

    pub fn dirichlet_faces(&self, grid: &Grid) -> Vec<Face> {
        match self {
            BoundaryCondition::Dirichlet => grid.faces(),
            BoundaryCondition::Neumann => vec![],
            BoundaryCondition::Mixed { dirichlet_faces } => dirichlet_faces.clone(),
        }
    }

    /// `true` for nodes where functions are pinned to zero.
    pub fn dirichlet_mask(&self, grid: &Grid) -> Result<Vec<bool>> {
        let faces = self.dirichlet_faces(grid);
        let valid = grid.faces();
        if let Some(f) = faces.iter().find(|f| !valid.contains(f)) {
            return Err(Error::Dimension(format!("face {f:?} does not exist on a {}D grid", grid.dim())));
        }
        Ok((0..grid.node_count())
            .map(|k| grid.faces_of(k).iter().any(|f| faces.contains(f)))
            .collect())
    }

    pub fn is_pure_neumann(&self) -> bool {
        matches!(self, BoundaryCondition::Neumann)
    }
}

/// Complex values on every node of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: Vec<Complex64>) -> Result<GridFunction> {
        if values.len() != grid.node_count() {
            return Err(Error::Dimension(format!(
                "{} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        Ok(GridFunction { grid: grid.clone(), values })
    }

    pub fn zeros(grid: &Grid) -> GridFunction {
        GridFunction {
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); grid.node_count()],
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> Complex64) -> GridFunction {
        let values = (0..grid.node_count()).map(|k| f(&grid.coordinates(k))).collect();
        GridFunction { grid: grid.clone(), values }
    }

    /// Weighted `L^p` norm; `p = inf` gives the maximum modulus.
    pub fn lp_norm(&self, p: f64) -> Result<f64> {
        lp_norm(&self.values, &self.grid.weights(), p)
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Sum of squared differences between neighbouring nodes.
    pub fn gradient_energy(&self) -> f64 {
        let n = self.grid.nodes_per_axis();
        let mut e = 0.0;
        for k in 0..self.values.len() {
            let (ix, iy) = self.grid.multi_index(k);
            if ix + 1 < n[0] {
                e += (self.values[k + 1] - self.values[k]).norm_sqr();
            }
            if self.grid.dim() == 2 && iy + 1 < n[1] {
                e += (self.values[k + n[0]] - self.values[k]).norm_sqr();
            }
        }
        e
    }

    /// CSV with one row per node: coordinates, real part, imaginary part.
    pub fn to_csv(&self) -> String {
        let mut out = if self.grid.dim() == 1 {
            String::from("x,re,im\n")
        } else {
            String::from("x,y,re,im\n")
        };
        for (k, v) in self.values.iter().enumerate() {
            for c in self.grid.coordinates(k) {
                let _ = write!(out, "{c:.17e},");
            }
            let _ = writeln!(out, "{:.17e},{:.17e}", v.re, v.im);
        }
        out
    }
}

pub fn lp_norm(values: &[Complex64], weights: &[f64], p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Domain(format!("p must be at least 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(values.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    // Scale by the maximum to avoid overflow for large p.
    let m = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if m == 0.0 {
        return Ok(0.0);
    }
    let s: f64 = values
        .iter()
        .zip(weights)
        .map(|(v, w)| w * (v.norm() / m).powf(p))
        .sum();
    Ok(m * s.powf(1.0 / p))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothness {
    Rough,
    Smooth,
    Bandlimited,
}

const SMOOTHING_PASSES: usize = 4;
const BAND_MODES: usize = 6;

/// Reproducible pseudo-random complex field.
///
/// `Rough` is independent Gaussian noise per node, `Smooth` applies a few
/// neighbour-averaging passes to it, and `Bandlimited` is a random
/// combination of the lowest sine modes of the domain, so the same seed gives
/// the same continuum function at every resolution.
pub fn random_test_function(grid: &Grid, seed: u64, smoothness: Smoothness) -> GridFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match smoothness {
        Smoothness::Bandlimited => random_bandlimited(grid, BAND_MODES, &mut rng),
        Smoothness::Rough | Smoothness::Smooth => {
            let mut values: Vec<Complex64> = (0..grid.node_count())
                .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
                .collect();
            if smoothness == Smoothness::Smooth {
                for _ in 0..SMOOTHING_PASSES {
                    values = average_neighbours(grid, &values);
                }
            }
            GridFunction { grid: grid.clone(), values }
        }
    }
}

fn average_neighbours(grid: &Grid, v: &[Complex64]) -> Vec<Complex64> {
    let n = grid.nodes_per_axis();
    (0..v.len())
        .map(|k| {
            let (ix, iy) = grid.multi_index(k);
            let mut acc = v[k] * 2.0 * grid.dim() as f64;
            let mut w = 2.0 * grid.dim() as f64;
            let mut add = |j: usize| {
                acc += v[j];
                w += 1.0;
            };
            if ix > 0 {
                add(k - 1);
            }
            if ix + 1 < n[0] {
                add(k + 1);
            }
            if grid.dim() == 2 {
                if iy > 0 {
                    add(k - n[0]);
                }
                if iy + 1 < n[1] {
                    add(k + n[0]);
                }
            }
            acc / w
        })
        .collect()
}

/// Random combination of the sine modes `sin(k pi x / L)`, `1 <= k <= modes`
/// per axis, with complex Gaussian coefficients damped like `1/k`.
pub fn random_bandlimited<R: Rng + ?Sized>(grid: &Grid, modes: usize, rng: &mut R) -> GridFunction {
    let l = grid.extents().to_vec();
    let mut coeffs = Vec::new();
    let ky_max = if grid.dim() == 2 { modes } else { 1 };
    for ky in 1..=ky_max {
        for kx in 1..=modes {
            let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            coeffs.push((kx, ky, c / (kx * ky) as f64));
        }
    }
    GridFunction::from_fn(grid, |x| {
        coeffs
            .iter()
            .map(|&(kx, ky, c)| {
                let sx = (kx as f64 * PI * x[0] / l[0]).sin();
                let sy = if x.len() == 2 { (ky as f64 * PI * x[1] / l[1]).sin() } else { 1.0 };
                c * sx * sy
            })
            .sum()
    })
}
