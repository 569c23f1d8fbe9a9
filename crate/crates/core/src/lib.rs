//! Hierarchical least-squares programming.
//!
//! A hierarchy is an ordered list of least-squares levels `A_l x ≈ b_l`; lower
//! levels are optimized only within the optimal set of the levels above. The
//! crate solves the dual, equality-constrained reformulation of such a
//! hierarchy with an ADMM solver ([`admm`]) and a primal-dual interior-point
//! reference solver ([`ipm`]), checks both against a sequential nullspace
//! solver ([`baseline`]), differentiates the solution ([`gradient`]) and runs
//! randomized benchmark suites ([`bench`]).

pub mod admm;
pub mod baseline;
pub mod bench;
pub mod error;
pub mod gradient;
pub mod ipm;
pub mod linalg;
pub mod problem;
pub mod precond;
pub mod projection;
pub mod report;

pub use error::{HlspError, Result};
pub use problem::{HlspProblem, HlspSolution, LevelData};
pub use report::{PhaseTimings, SolveReport, SolveStatus};
