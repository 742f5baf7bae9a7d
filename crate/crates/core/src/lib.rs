//! Unruh-DeWitt detector response, non-local correlations and harvested
//! entanglement for static detectors outside a non-rotating (2+1)-dimensional
//! BTZ black hole and its RP² geon.
//!
//! Units: the Gaussian switching width σ is fixed to 1, so every length,
//! time and inverse energy gap is measured in units of σ. All observables
//! are reported per λ̃² = λ²σ.
//!
//! Module map:
//!
//! * [`geometry`]: horizon radius, redshift factors, radial proper distances.
//! * [`quadrature`]: double-exponential quadrature with the branch-cut
//!   decomposition used by the image-sum integrals.
//! * [`wightman`]: pointwise BTZ and geon Wightman functions.
//! * [`observables`]: closed-form transition probabilities, correlation
//!   matrix element and concurrence.
//! * [`oracle`]: brute-force double integrals of the defining expressions.
//! * [`shadow`]: entanglement-shadow boundary and gap crossover search.
//! * [`sweep`]: grid sweeps, plot presets and CSV emission.
//! * [`validation`]: oracle-equivalence and invariant checks.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod observables;
pub mod oracle;
pub mod quadrature;
pub mod shadow;
pub mod sweep;
pub mod validation;
pub mod wightman;

pub use error::{Error, Result};
pub use geometry::{BoundaryCondition, DetectorConfig, DetectorPair, Family, SpacetimeParams};
pub use observables::{EvalSpec, HarvestResult};
pub use quadrature::{QuadResult, QuadratureSpec};

/// Crate version, echoed into every output file.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
