//! Fixtures shared by the benchmarks.

use semimax_core::{assemble, builtin_field, factorize, BoundaryCondition, DiscreteOperator, Grid, SpectralFactorization};

pub fn operator(name: &str, n: usize) -> DiscreteOperator {
    let g = Grid::interval(1.0, n).expect("valid grid");
    assemble(&builtin_field(name, &g).expect("built-in field"), &BoundaryCondition::Dirichlet).expect("assembly")
}

pub fn factorized(name: &str, n: usize) -> SpectralFactorization {
    factorize(&operator(name, n)).expect("factorization")
}
