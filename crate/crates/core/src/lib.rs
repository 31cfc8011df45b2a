//! Equal-time Dirac brackets for singular autonomous Lagrangians, derived by
//! Taylor-expanding the equations of motion at the initial instant,
//! identifying the independent initial conditions, and solving the
//! bracket-identification equations — then cross-checked against time
//! covariance, the Jacobi identity, the classical Dirac-Bergmann algorithm,
//! and direct trajectory integration.

pub mod covariance_verify;
pub mod dirac_oracle;
pub mod error;
pub mod bracket_solver;
pub mod initial_instant;
pub mod jsonout;
pub mod lattice_fixtures;
pub mod linsolve;
pub mod mechanics;
pub mod numeric;
pub mod pipeline;
pub mod symexpr;
pub mod sysparse;

pub use bracket_solver::{BracketTable, Provenance, SolverConfig};
pub use covariance_verify::{CheckResult, CheckStatus, Residual, VerificationReport};
pub use error::{Error, Result};
pub use initial_instant::{ICConstraintSet, TaylorSolution};
pub use lattice_fixtures::{LatticeConfig, LatticeModel};
pub use pipeline::{Check, Derivation, RunConfig, VerifyOptions};
pub use symexpr::{Expr, Parity, Rat, SeriesPoly, Sym};
pub use sysparse::SystemSpec;
