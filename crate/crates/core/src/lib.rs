//! Numerical certification of total-variation bounds in the Lindeberg
//! central limit theorem.
//!
//! The crate builds exact grid densities of normalized sums of independent,
//! non-identically distributed summands, measures their distance to the
//! standard normal, evaluates the explicit Fisher-information bound and
//! checks every auxiliary identity of the Stein's-method argument by
//! quadrature.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dist;
pub mod error;
pub mod metrics;
pub mod quad;
pub mod special;
pub mod stein;
pub mod sums;

pub use bounds::{Bound, BoundReport};
pub use dist::{CustomDensity, DistributionSpec, Family, MixtureComponent, ScoreFn, ScoreProvenance};
pub use error::{Error, Result};
pub use metrics::{DistanceReport, Reference};
pub use stein::{SmoothFn, SteinGrid, SteinSolution, TestFunction};
pub use sums::{GridConfig, GridDensity, SumSequence};
