use std::fmt;
use std::time::Duration;

use crate::problem::HlspSolution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
        }
    }
}

/// Wall time per solver phase.
///
/// The interior-point solver and the baseline only fill `kkt` and `solve`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PhaseTimings {
    /// Assembly and factorization of the reduced KKT matrix and the inner
    /// elimination matrices.
    pub kkt: Duration,
    pub rhs: Duration,
    pub solve: Duration,
    /// Recovery of the slacks and primal-dual blocks.
    pub lambda: Duration,
    pub projection: Duration,
    /// Part of `projection` spent finding cubic roots.
    pub roots: Duration,
    /// Dual ascent, residuals and the step-size update.
    pub dual: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: HlspSolution,
    pub status: SolveStatus,
    pub iterations: usize,
    pub residual: f64,
    /// Number of factorizations of the reduced KKT matrix (ADMM only).
    pub factorizations: usize,
    pub timings: PhaseTimings,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

impl fmt::Display for SolveReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "status      {}", self.status.as_str())?;
        writeln!(f, "iterations  {}", self.iterations)?;
        writeln!(f, "residual    {:.3e}", self.residual)?;
        writeln!(f, "time        {:.3} ms", self.wall_time.as_secs_f64() * 1e3)?;
        for (l, o) in self.solution.per_level_objective.iter().enumerate() {
            writeln!(f, "level {:<3}   {:.10e}", l + 1, o)?;
        }
        let x: Vec<String> = self.solution.x.iter().map(|v| format!("{v:.10e}")).collect();
        write!(f, "x           [{}]", x.join(", "))
    }
}
