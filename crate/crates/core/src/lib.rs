//! Càdlàg rough stochastic analysis on finite time grids.
//!
//! The crate covers rough-path lifts of jump drivers, p-variation and
//! ensemble `V^p L^q` seminorms, a stochastic sewing engine with rate
//! diagnostics, Itô / rough / Young integrals, bracket calculus with a jump
//! Itô formula, and an RSDE solver.
//!
//! # Conventions
//!
//! * Processes live on a [`Skeleton`]: the grid points plus one extra
//!   *left node* before each declared jump. Step `k` of a jump grid point is
//!   split into a continuous substep `t_{k-1} -> t_k-` and a jump substep
//!   `t_k- -> t_k` of zero duration.
//! * Vectors are flat `f64` slices. Matrices are row-major; the second
//!   level satisfies `XX[i * d + j] = ∫ (X^i - X^i_s) dX^j`.
//! * A Gubinelli derivative of `Y ∈ R^m` is stored `m x d`: `Y'[a * d + i]`.
//! * Integrals use left-point (forward, Itô) evaluation throughout.

pub mod calculus;
pub mod control;
pub mod drivers;
pub mod error;
pub mod grid;
pub mod lift;
pub mod linalg;
pub mod midpoint;
pub mod norms;
pub mod path;
pub mod pvar;
pub mod rng;
pub mod rsde;
pub mod sewing;
pub mod smooth;
pub mod stats;
pub mod stochint;

/// Library version, recorded in experiment manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use calculus::ControlledPath;
pub use control::{ControlFn, PVarControl, TableControl, TimeControl};
pub use drivers::{DriverKind, DriverSpec, JumpDist};
pub use error::{Error, Result};
pub use grid::{Partition, TimeGrid};
pub use lift::RoughLift;
pub use midpoint::{alternating_midpoints, w_midpoint, AlternatingMidpoints};

pub use norms::{lq_norm, LqEstimate, NormSpec};
pub use path::{MartingalePath, SamplePath, Skeleton};
pub use pvar::{p_variation, TwoParamTable};
pub use rsde::{CoefficientSet, RsdeResult};
pub use sewing::{Germ, RateReport, SewOutput};
pub use smooth::SmoothFn;



