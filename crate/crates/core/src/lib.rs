//! Global minimization of `f(x) + g(x)/h(x)` over an elliptic set, where `f`
//! is quadratic, `g` is a squared double-well term and `h` is a concave
//! quadratic.
//!
//! The ratio is removed by sweeping a parameter `mu` over `[mu0, 1/delta]`;
//! each subproblem `min f + mu g` over `{h >= 1/mu}` has a concave dual in two
//! variables whose maximizer, when it lies in the positive-definite region,
//! yields a certified global minimizer of the subproblem. The best subproblem
//! answer is the global answer.
//!
//! * [`problem`] instance data, validation and primal evaluation
//! * [`dual`] the two-dimensional canonical dual
//! * [`solver`] dual ascent, certification and the `mu` sweep
//! * [`oracle`] brute-force reference minimizer for `n <= 3`
//! * [`io`] file formats, instance generator, CSV dumps

pub mod dual;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod problem;
pub mod solver;

pub use dual::{DualEvaluation, DualPoint, GFactorization};
pub use io::{GenOptions, InstanceFile, ResultFile};
pub use oracle::OracleReport;
pub use problem::{FractionalProgram, MuInterval, PrimalPoint, ProgramData};
pub use solver::{
    Certificate, CertificateKind, DualSolution, DualStatus, SolveResult, SolverOptions,
};
