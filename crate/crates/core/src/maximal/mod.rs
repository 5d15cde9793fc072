//! Maximal functions of semigroups, transfer operators and Duhamel
//! decompositions.

mod duhamel;
mod norm;
mod scan;
mod transfer;

pub use duhamel::*;
pub use norm::*;
pub use scan::*;
pub use transfer::*;
