use thiserror::Error;

/// Errors surfaced by the derivation pipeline and its supporting kernels.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("parity violation: {0}")]
    ParityViolation(String),
    #[error("cannot evaluate expression containing odd generators")]
    OddEvaluation,
    #[error("cannot evaluate expression containing the imaginary unit")]
    ComplexEvaluation,
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("syntax error at line {line}, column {col}: {msg}")]
    SyntaxError { line: usize, col: usize, msg: String },
    #[error("unknown symbol `{name}` at line {line}, column {col}")]
    UnknownSymbol { name: String, line: usize, col: usize },
    #[error("explicit time dependence at line {line}, column {col}: the system must be autonomous")]
    NonAutonomous { line: usize, col: usize },
    #[error("duplicate declaration `{0}`")]
    DuplicateCoord(String),
    #[error("gauge freedom detected: {0}")]
    GaugeFreedom(String),
    #[error("inconsistent equations: {0}")]
    Inconsistent(String),
    #[error("constraint cannot be solved for any initial condition: {0}")]
    UnsolvableConstraint(String),
    #[error("Hamiltonian is not conserved along the series: {0}")]
    NonConservedHamiltonian(String),
    #[error("Hamiltonian has odd Grassmann parity: {0}")]
    OddHamiltonian(String),
    #[error("candidate basis cannot represent the brackets (validation residual {residual:e} > tol {tol:e})")]
    BasisInsufficient { residual: f64, tol: f64 },
    #[error("brackets are not uniquely determined (nullspace dimension {dim}); witness: {witness}")]
    NonUniqueBrackets { dim: usize, witness: String },
    #[error("covariance violation for pair ({a},{b}) at order {order}: {detail}")]
    CovarianceViolation { a: String, b: String, order: usize, detail: String },
    #[error("Jacobi identity violated: residual {0:e}")]
    JacobiViolation(f64),
    #[error("Hamilton/Euler-Lagrange equivalence violated for `{0}`")]
    EquivalenceViolation(String),
    #[error("integration step produced non-finite values at t = {0}")]
    StepRejected(f64),
    #[error("constraint consistency iteration did not terminate within {0} steps")]
    NonTerminating(usize),
    #[error("constraint matrix is singular on the sample")]
    SingularMatrix,
    #[error("linear solve requires division by a non-invertible pivot `{0}`")]
    PivotNotInvertible(String),
    #[error("equations are not linear in the unknowns: {0}")]
    NonlinearSystem(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
