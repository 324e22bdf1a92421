//! Diamond dicing over multidimensional fact tables.
//!
//! A diamond is the largest subcube in which every order-1 slice of
//! dimension `i` aggregates (COUNT or SUM) to at least `k_i`. This crate
//! computes diamonds by iterative pruning, searches for the carat number κ,
//! evaluates the closed-form bounds that relate cube size and carats, and
//! provides heuristics for the limited-shape densest-subcube problem,
//! synthetic generators, and brute-force oracles for small inputs.
//!
//! ```
//! use diamond_core::{dice, fixtures, AggregatorKind, CaratVector};
//!
//! let cube = fixtures::sales_cube();
//! let k = CaratVector::new(vec![4.0, 10.0]).unwrap();
//! let result = dice(&cube, &k, AggregatorKind::Sum).unwrap();
//! assert_eq!(result.diamond.cell_count(), 9);
//! ```

pub mod bounds;
pub mod cube;
pub mod datagen;
pub mod dcld;
pub mod dice;
pub mod error;
pub mod fixtures;
pub mod ingest;
pub mod kappa;
pub mod oracle;
mod par;

pub use cube::{AggregatorKind, Cell, Cube, CubeBuilder, CubeStats, Dimension};
pub use dice::{
    dice, dice_with, verify_carats, CaratVector, DiamondResult, DiceOptions, PassMode, PassRecord, PassStorage,
    SliceStatsTable,
};
pub use error::{Error, Result};
pub use ingest::{ingest_csv, write_csv, ColumnRef, FactSchema};
pub use kappa::{kappa, kappa_binary, kappa_sequential, KappaResult, SearchMethod};
