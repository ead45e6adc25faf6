//! Model-averaged tail area (MATA) confidence intervals for a linear
//! combination `theta = a' beta` of regression coefficients, averaged over all
//! subsets of a block of nuisance coefficients, together with an easily
//! computed upper bound on the minimum coverage probability of such an
//! interval.
//!
//! - [`linreg`]: full and restricted least-squares fits, `U_K`, `v(K)`, and
//!   the correlation profile giving `|rho|_max`.
//! - [`weights`]: data-based model weights (GIC/AIC/BIC and custom kernels).
//! - [`mata`]: the interval itself, from the tail-area estimating equations.
//! - [`coverage`]: exact coverage of the two-model interval as a double
//!   integral.
//! - [`bound`]: the minimum-coverage upper bound and curve sweeps.
//! - [`mcverify`]: Monte Carlo cross-checks.
//! - [`suites`]: the named verification runs built on top of them.

pub mod bound;
pub mod coverage;
pub mod error;
pub mod linreg;
pub mod mata;
pub mod mcverify;
pub mod quadrature;
pub mod roots;
pub mod special;
pub mod suites;
pub mod weights;

pub use error::{MataError, Result};
pub use linreg::{ModelFit, ModelSubset, RegressionProblem};
pub use weights::WeightSpec;
