//! Numerical study of maximal functions for semigroups generated by
//! divergence-form operators with complex coefficients.
//!
//! The shared types are re-exported at the crate root; the algorithms live in
//! the modules.

pub mod calculus;
pub mod discretize;
pub mod ellipticity;
pub mod error;
pub mod grid;
pub mod linalg;
pub mod maximal;
pub mod quadrature;
pub mod special;
pub mod subordinate;

pub use calculus::{
    factorize, ImaginaryPowerBound, KernelMode, MultiplierSpec, RotationSign, SpectralFactorization, Symbol,
};
pub use discretize::{assemble, builtin_field, DiscreteOperator, FieldTag, Layout, MatrixField};
pub use ellipticity::{ComplexMatrix, EllipticityReport, PRange};
pub use error::{Error, Result};
pub use grid::{BoundaryCondition, Face, Grid, GridFunction, Smoothness};
pub use linalg::CMat;
pub use maximal::{
    BetaMeasure, DuhamelReport, MaximalScan, NormEstimate, ScanKind, SearchOptions, TimeGrid, TransferPlan,
    TransferSummary,
};
pub use quadrature::QuadratureRule;
pub use subordinate::MellinTable;
pub use num_complex::Complex64;
