//! Regularized least-squares identification of discrete-time linear systems.
//!
//! The crate implements three families of regularizers for high-order FIR
//! models and the machinery to compare them:
//!
//! * [`kernels`] and [`kernel_estimator`]: stable-spline / TC kernels and their
//!   integral versions, tuned by empirical Bayes (marginal likelihood).
//! * [`hankel`]: nuclear norm of the Hankel matrix of the impulse response,
//!   solved by ADMM with singular value thresholding.
//! * [`atomic`]: a first-order pole dictionary with an ℓ1 penalty, solved by
//!   coordinate descent.
//!
//! [`prior_lab`] samples the prior densities those regularizers induce, and
//! [`simgen`] generates random stable systems and runs seeded Monte Carlo
//! campaigns. [`io`] holds the CSV and report formats used by the CLI.

pub mod atomic;
pub mod error;
pub mod hankel;
pub mod io;
pub mod kernel_estimator;
pub mod kernels;
mod linalg;
pub mod prior_lab;
pub mod simgen;
pub mod simplex;

pub use error::{Error, Result};
pub use kernels::{Hyperparameters, KernelKind, RegularizationMatrix};
