use super::scan::MaximalScan;
use crate::discretize::Layout;
use crate::error::{Error, Result};
use crate::grid::{random_bandlimited, GridFunction};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Fewest independent starting functions accepted.
pub const MIN_INITIAL: usize = 20;
const PERTURBATION_MODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOptions {
    pub steps: usize,
    pub seed: u64,
    /// Initial relative perturbation size.
    pub sigma: f64,
    /// Steps after which the perturbation size halves.
    pub halve_every: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { steps: 200, seed: 0, sigma: 0.5, halve_every: 50 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NormEstimate {
    /// Best ratio over the starting functions.
    pub initial_max: f64,
    /// Best ratio after the greedy search; a lower bound for the norm.
    pub estimate: f64,
    /// Best ratio after each step, nondecreasing.
    pub history: Vec<f64>,
    pub accepted: usize,
    pub worst_f: GridFunction,
}

/// Lower bound for the norm of a maximal operator: the best ratio over the
/// starting functions, improved greedily by random bandlimited perturbations
/// of the current maximizer.
pub fn operator_norm_estimate(
    scanner: &dyn Fn(&GridFunction) -> Result<MaximalScan>,
    layout: &Layout,
    initial: &[GridFunction],
    opts: &SearchOptions,
) -> Result<NormEstimate> {
    if initial.len() < MIN_INITIAL {
        return Err(Error::Domain(format!(
            "norm estimate needs at least {MIN_INITIAL} starting functions, got {}",
            initial.len()
        )));
    }
    let mut best: Option<(f64, GridFunction)> = None;
    for f in initial {
        let f = layout.admissible(f)?;
        let r = scanner(&f)?.ratio;
        if best.as_ref().is_none_or(|(b, _)| r > *b) {
            best = Some((r, f));
        }
    }
    let (initial_max, mut worst) = best.expect("nonempty");
    let mut current = initial_max;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut history = Vec::with_capacity(opts.steps);
    let mut accepted = 0;
    let p = scanner(&worst)?.p;
    for step in 0..opts.steps {
        let sigma = opts.sigma * 0.5f64.powi((step / opts.halve_every.max(1)) as i32);
        let dir = layout.admissible(&random_bandlimited(&layout.grid, PERTURBATION_MODES, &mut rng))?;
        let dn = dir.lp_norm(p)?;
        let wn = worst.lp_norm(p)?;
        if dn > 0.0 && wn > 0.0 {
            let c = Complex64::new(sigma * wn / dn, 0.0);
            let values = worst.values.iter().zip(&dir.values).map(|(w, d)| w + c * d).collect();
            let candidate = GridFunction::new(&layout.grid, values)?;
            let r = scanner(&candidate)?.ratio;
            if r > current {
                current = r;
                worst = candidate;
                accepted += 1;
            }
        }
        history.push(current);
    }
    Ok(NormEstimate { initial_max, estimate: current, history, accepted, worst_f: worst })
}
