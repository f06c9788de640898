//! Heterogeneous multiscale integration of stiff slow-fast systems
//!
//! ```text
//! dx/dt = f(x, y),    dy/dt = g(x, y) / ε
//! ```
//!
//! with high-order approximations of the slow invariant manifold.
//!
//! A run has two stages. The full system is integrated with a small step
//! through the initial layer until the fast variable has settled near the
//! manifold; afterwards only the reduced equation `dX/dt = f(X, Γ̂_k(X, ε))`
//! is integrated, with `Γ̂_k` computed on the fly by short relaxation solves
//! (see [`manifold`]).

// `!(a < b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod convergence;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod manifold;
pub mod micro;
pub mod riccati;
pub mod steppers;
pub mod system;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

pub use benchmarks::{registry, BenchmarkCase, CaseOverrides, ConvergenceReport, SolverKind, SweepAxis};
pub use convergence::{fit_loglog, LineFit};
pub use driver::{simulate, DriverConfig, SimulationResult, Trajectory};
pub use error::{Error, Result};
pub use manifold::{Algorithm, DiffScheme, ManifoldApproximator, ManifoldConfig, ManifoldEval};
pub use micro::{InitialGuess, MicroConfig};
pub use riccati::{LinearTwoScale, RiccatiSolution};
pub use steppers::Scheme;
pub use system::{SampleBox, TwoScaleSystem};
