//! Gaussian quadrature rules.
//!
//! Gauss-Jacobi rules integrate `(1 - x)^a (1 + x)^b f(x)` on `[-1, 1]`; the
//! nodes come from the Golub-Welsch eigenvalue problem and are then polished
//! with Newton steps on the three-term recurrence, and the weights are taken
//! from the closed-form Christoffel expression rather than from eigenvector
//! components. Gauss-Legendre is the case `a = b = 0`.

use crate::error::{Error, Result};
use crate::special::ln_gamma_real;
use faer::{Mat, Side};

/// Nodes and weights of a quadrature rule.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Affinely maps a rule on `[-1, 1]` with unit Jacobian to `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> QuadratureRule {
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        QuadratureRule {
            nodes: self.nodes.iter().map(|&x| mid + half * x).collect(),
            weights: self.weights.iter().map(|&w| w * half).collect(),
        }
    }

    fn append(&mut self, other: QuadratureRule) {
        self.nodes.extend(other.nodes);
        self.weights.extend(other.weights);
    }
}

/// Evaluates `P_n^{(a,b)}(x)` and its derivative.
fn jacobi_with_derivative(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let p = jacobi_p(n, a, b, x);
    let dp = if n == 0 {
        0.0
    } else {
        0.5 * (n as f64 + a + b + 1.0) * jacobi_p(n - 1, a + 1.0, b + 1.0, x)
    };
    (p, dp)
}

/// Jacobi polynomial `P_n^{(a,b)}(x)` in the standard normalisation.
pub fn jacobi_p(n: usize, a: f64, b: f64, x: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut p_prev = 1.0;
    let mut p = 0.5 * (a - b) + 0.5 * (a + b + 2.0) * x;
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + a + b;
        let a1 = 2.0 * k * (k + a + b) * (c - 2.0);
        let a2 = (c - 1.0) * (a * a - b * b);
        let a3 = (c - 2.0) * (c - 1.0) * c;
        let a4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * c;
        let next = ((a2 + a3 * x) * p - a4 * p_prev) / a1;
        p_prev = p;
        p = next;
    }
    p
}

/// Gauss-Jacobi rule with `n` nodes for the weight `(1 - x)^a (1 + x)^b`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    if n == 0 {
        return Err(Error::Domain("quadrature rule needs at least one node".into()));
    }
    if !(a > -1.0 && b > -1.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!(
            "Jacobi exponents must exceed -1 (got a = {a}, b = {b})"
        )));
    }

    // Golub-Welsch for initial nodes.
    let mut jac = Mat::<f64>::zeros(n, n);
    jac[(0, 0)] = (b - a) / (a + b + 2.0);
    for k in 1..n {
        let kf = k as f64;
        let c = 2.0 * kf + a + b;
        jac[(k, k)] = (b * b - a * a) / (c * (c + 2.0));
        let beta = if k == 1 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + a + b).powi(2) * (3.0 + a + b))
        } else {
            4.0 * kf * (kf + a) * (kf + b) * (kf + a + b) / (c * c * (c + 1.0) * (c - 1.0))
        };
        let off = beta.sqrt();
        jac[(k, k - 1)] = off;
        jac[(k - 1, k)] = off;
    }
    let mut nodes = jac
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Decomposition(format!("Golub-Welsch: {e:?}")))?;
    nodes.sort_by(|x, y| x.total_cmp(y));

    let nf = n as f64;
    let ln_const = ln_gamma_real(nf + a + 1.0) + ln_gamma_real(nf + b + 1.0)
        - ln_gamma_real(nf + a + b + 1.0)
        - ln_gamma_real(nf + 1.0)
        + (a + b + 1.0) * std::f64::consts::LN_2;
    let constant = ln_const.exp();

    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = jacobi_with_derivative(n, a, b, *x);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x = (*x - step).clamp(-1.0, 1.0);
            if step.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = jacobi_with_derivative(n, a, b, *x);
        weights.push(constant / ((1.0 - *x * *x) * dp * dp));
    }
    Ok(QuadratureRule { nodes, weights })
}

/// Gauss-Legendre rule with `n` nodes on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> QuadratureRule {
    gauss_jacobi(n, 0.0, 0.0).expect("Legendre parameters are always valid")
}

/// Composite Gauss-Legendre on `panels` equal panels of `[lo, hi]`.
pub fn composite_legendre(lo: f64, hi: f64, panels: usize, per_panel: usize) -> QuadratureRule {
    let base = gauss_legendre(per_panel);
    let mut rule = QuadratureRule {
        nodes: Vec::new(),
        weights: Vec::new(),
    };
    let width = (hi - lo) / panels as f64;
    for k in 0..panels {
        let a = lo + k as f64 * width;
        rule.append(base.mapped(a, a + width));
    }
    rule
}

/// Composite Gauss-Legendre with panels refined geometrically (ratio 2)
/// towards both endpoints until the end panels are no wider than `layer`.
/// Resolves boundary layers of width `layer` at either end of `[lo, hi]`.
/// `n_total` nodes are spread evenly over the panels (at least 4 per panel).
pub fn graded_legendre(lo: f64, hi: f64, layer: f64, n_total: usize) -> QuadratureRule {
    let half = 0.5 * (hi - lo);
    let levels = if layer > 0.0 && layer < half {
        (half / layer).log2().ceil() as usize
    } else {
        1
    };
    let levels = levels.max(1);
    // Left half: [0, half 2^{-(levels-1)}], ..., [half/2, half].
    let mut breaks = vec![0.0];
    for j in (0..levels).rev() {
        breaks.push(half * 0.5f64.powi(j as i32));
    }
    let panels = 2 * levels;
    let per_panel = (n_total / panels).max(4);
    let base = gauss_legendre(per_panel);
    let mut rule = QuadratureRule {
        nodes: Vec::with_capacity(panels * per_panel),
        weights: Vec::with_capacity(panels * per_panel),
    };
    for w in breaks.windows(2) {
        rule.append(base.mapped(lo + w[0], lo + w[1]));
    }
    for w in breaks.windows(2).rev() {
        rule.append(base.mapped(hi - w[1], hi - w[0]));
    }
    rule
}
