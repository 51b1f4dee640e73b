//! Exact and approximate permanents of random order-d complex tensors.
//!
//! The permanent of a cubical tensor generalizes the matrix permanent: it
//! sums, over every tuple of one-to-one index maps for modes 2..d, the
//! product of the selected entries.  Exact evaluation costs (n!)^(d-1)
//! products, so beyond desk scale this crate estimates instead: a random
//! tensor R with i.i.d. unit-variance entries of mean mu is written as
//! R = mu * (J + z A) with z = 1/mu and A zero-mean, and
//!
//! ```text
//! per(J + z A) / (n!)^(d-1)  =  sum_k a_k z^k
//! ```
//!
//! where a_k averages the permanents of all k-subtensors of A.  The low
//! coefficients dominate for concentrated ensembles, and they are in turn
//! approximated by symmetric functions of hyperplane sums, ending in the
//! closed-form estimate mu^n (n!)^(d-1) exp(V1 z - xi z^2 / 2).
//!
//! Modules mirror that pipeline: [`tensor`] (dense storage and interchange),
//! [`exact`] (permanent kernels), [`series`] (coefficients a_k),
//! [`symmetric`] (hyperplane scores, V/D statistics, Hermite recursion),
//! [`sampling`] (seeded entry distributions), [`approx`] (the estimators)
//! and [`verify`] (Monte Carlo experiments against the exact kernels).

pub mod approx;
pub mod error;
pub mod exact;
pub mod numeric;
pub mod sampling;
pub mod series;
pub mod symmetric;
pub mod tensor;
pub mod verify;
pub mod wire;

pub use error::{Error, Result};
pub use exact::{permanent, permanent_ryser, permanent_scaled, PermanentValue};
pub use series::{CoefficientSeries, SeriesKind};
pub use tensor::{IndexSelection, Tensor};
