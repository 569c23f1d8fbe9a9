//! ADMM solver for the dual equality-constrained hierarchy.
//!
//! Each iteration solves the reduced primal system in `x`, recovers the
//! slacks and primal-dual blocks, projects the over-relaxed split candidates
//! onto the duality-gap sets, and performs dual ascent. The step size is
//! adapted from the ratio of scaled primal and dual residuals; the reduced
//! matrix is refactorized only when it drifts by more than `refactor_ratio`.

mod kkt;
mod residuals;
mod state;
mod steps;

use std::time::{Duration, Instant};

pub use kkt::{
    assemble_reduced_kkt, assemble_rhs, build_dual_cache, last_level_weight, multiplier_weight, recover_slacks,
    solve_x, DualCache, LevelElimination, ReducedKkt, ReducedRhs,
};
pub use residuals::{compute_residuals, rho_decision, update_rho, Residuals, RhoUpdate};
pub use state::AdmmState;
pub use steps::{dual_ascent, update_splits};

use crate::error::{HlspError, Result};
use crate::precond::{precondition, EquilibrationScaling, ScaledData};
use crate::problem::{HlspProblem, HlspSolution};
use crate::projection::IpmProjectionConfig;
use crate::report::{PhaseTimings, SolveReport, SolveStatus};

/// How the adaptive step size is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoAdaptation {
    /// Keep `ρ` fixed.
    Off,
    /// Apply the proposal every iteration; refactorize when the flag fires.
    Every,
    /// Apply the proposal only together with a refactorization.
    OnRefactor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmConfig {
    pub rho_init: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub chi: f64,
    pub max_iters: usize,
    pub rho_mu: f64,
    pub rho_eta: f64,
    pub rho_phi: f64,
    pub rho_nu: f64,
    /// Weight on the diagonals of `M_l`.
    pub rho_eps: f64,
    pub refactor_ratio: f64,
    pub adaptation: RhoAdaptation,
    /// Iterations between step-size proposals.
    pub adapt_interval: usize,
    /// Use the multiplier shifts `μ/ρ_•` exactly as printed instead of
    /// `μ/(ρ ρ_•)`; only stable for `ρ = 1`.
    pub literal_rho: bool,
    pub equilibrate: bool,
    /// Project with the interior-point path instead of the cubic.
    pub ipm_projection: bool,
    pub ipm_projection_config: IpmProjectionConfig,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho_init: 1.0,
            sigma: 1e-6,
            alpha: 1.6,
            chi: 1e-4,
            max_iters: 50_000,
            rho_mu: 1000.0,
            rho_eta: 1000.0,
            rho_phi: 0.1,
            rho_nu: 0.1,
            rho_eps: 0.1,
            refactor_ratio: 5.0,
            adaptation: RhoAdaptation::OnRefactor,
            adapt_interval: 1,
            literal_rho: false,
            equilibrate: true,
            ipm_projection: false,
            ipm_projection_config: IpmProjectionConfig::default(),
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rho_init", self.rho_init),
            ("sigma", self.sigma),
            ("chi", self.chi),
            ("rho_mu", self.rho_mu),
            ("rho_eta", self.rho_eta),
            ("rho_phi", self.rho_phi),
            ("rho_nu", self.rho_nu),
            ("rho_eps", self.rho_eps),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(HlspError::Parse(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(HlspError::Parse(format!("alpha must lie in (0, 2), got {}", self.alpha)));
        }
        if !(self.refactor_ratio > 1.0) || self.adapt_interval == 0 {
            return Err(HlspError::Parse("refactor_ratio must exceed 1 and adapt_interval be positive".into()));
        }
        Ok(())
    }
}

/// Progress of an ADMM solve, usable for stepping through iterations.
#[derive(Debug, Clone)]
pub struct AdmmSolver {
    pub config: AdmmConfig,
    pub scaling: EquilibrationScaling,
    pub data: ScaledData,
    pub cache: DualCache,
    pub kkt: ReducedKkt,
    pub state: AdmmState,
    pub residuals: Option<Residuals>,
    pub factorizations: usize,
    pub timings: PhaseTimings,
}

impl AdmmSolver {
    pub fn new(problem: &HlspProblem, config: AdmmConfig) -> Result<Self> {
        Self::with_state(problem, config, None)
    }

    /// Starts from `warm` when given; its blocks must match the problem.
    pub fn with_state(problem: &HlspProblem, config: AdmmConfig, warm: Option<AdmmState>) -> Result<Self> {
        config.validate()?;
        problem.validate()?;
        let scaling = if config.equilibrate {
            precondition(problem)?.1
        } else {
            EquilibrationScaling::identity(problem)
        };
        let data = ScaledData::new(problem, &scaling);
        let mut timings = PhaseTimings::default();
        let t = Instant::now();
        let cache = build_dual_cache(&data, &config)?;
        let state = match warm {
            Some(s) if s.fits(&data) => s,
            Some(_) => return Err(HlspError::DimensionMismatch("warm-start state does not match the problem".into())),
            None => AdmmState::zeros(&data, config.rho_init),
        };
        let kkt = assemble_reduced_kkt(&data, &config, &cache, state.rho_kkt)?;
        timings.kkt += t.elapsed();
        Ok(Self { config, scaling, data, cache, kkt, state, residuals: None, factorizations: 1, timings })
    }

    /// Primal step: reduced solve for `x`, then slacks and primal-dual blocks.
    pub fn update_primal(&mut self) -> Result<()> {
        let t = Instant::now();
        let rhs = assemble_rhs(&self.data, &self.config, &self.cache, &self.state)?;
        let t1 = Instant::now();
        self.state.x = solve_x(&self.kkt, &rhs);
        let t2 = Instant::now();
        recover_slacks(&self.data, &self.config, &self.cache, &rhs, &mut self.state);
        self.timings.rhs += t1 - t;
        self.timings.solve += t2 - t1;
        self.timings.lambda += t2.elapsed();
        Ok(())
    }

    /// One full iteration; returns the residual norm after it.
    pub fn step(&mut self) -> Result<f64> {
        self.update_primal()?;
        let t = Instant::now();
        let roots = update_splits(&self.data, &self.config, &mut self.state)?;
        self.timings.projection += t.elapsed();
        self.timings.roots += roots;
        let t = Instant::now();
        dual_ascent(&self.data, &self.config, &mut self.state);
        let res = compute_residuals(&self.data, &self.state);
        let norm = res.norm;
        self.state.iter += 1;
        let adapt = self.config.adaptation != RhoAdaptation::Off
            && self.state.iter % self.config.adapt_interval == 0
            && norm >= self.config.chi;
        let mut refactor = false;
        if adapt {
            let u = update_rho(self.state.rho, self.state.rho_kkt, &res, &self.config);
            match self.config.adaptation {
                RhoAdaptation::Every => {
                    self.state.rho = u.rho;
                    refactor = u.refactor;
                }
                RhoAdaptation::OnRefactor if u.refactor => {
                    self.state.rho = u.rho;
                    refactor = true;
                }
                _ => {}
            }
        }
        self.residuals = Some(res);
        self.timings.dual += t.elapsed();
        if refactor {
            let t = Instant::now();
            self.kkt = assemble_reduced_kkt(&self.data, &self.config, &self.cache, self.state.rho)?;
            self.state.rho_kkt = self.state.rho;
            self.factorizations += 1;
            self.timings.kkt += t.elapsed();
        }
        Ok(norm)
    }

    /// Current iterate mapped back to the original problem.
    pub fn solution(&self, problem: &HlspProblem) -> HlspSolution {
        let x = self.scaling.unscale_x(&self.state.x);
        let lambda = self
            .state
            .lambda
            .iter()
            .enumerate()
            .map(|(l, lb)| if lb.is_empty() { lb.clone() } else { self.scaling.unscale_lambda(l, lb) })
            .collect();
        let residual = self.residuals.as_ref().map(|r| r.norm).unwrap_or(f64::INFINITY);
        HlspSolution::from_x(problem, x, lambda, residual)
    }
}

/// Runs ADMM until `‖k_prim, k_dual‖₂ < χ` or `max_iters`.
///
/// Hitting the iteration cap is not an error: the report carries the last
/// iterate with status [`SolveStatus::MaxIterations`].
pub fn solve(problem: &HlspProblem, config: &AdmmConfig) -> Result<SolveReport> {
    solve_warm(problem, config, None)
}

pub fn solve_warm(problem: &HlspProblem, config: &AdmmConfig, warm: Option<AdmmState>) -> Result<SolveReport> {
    let start = Instant::now();
    let mut solver = AdmmSolver::with_state(problem, config.clone(), warm)?;
    let mut status = SolveStatus::MaxIterations;
    let mut norm = f64::INFINITY;
    for _ in 0..config.max_iters {
        norm = solver.step()?;
        if !norm.is_finite() {
            return Err(HlspError::SingularSystem(format!("ADMM diverged at iteration {}", solver.state.iter)));
        }
        if norm < config.chi {
            status = SolveStatus::Converged;
            break;
        }
    }
    let solution = solver.solution(problem);
    Ok(SolveReport {
        solution,
        status,
        iterations: solver.state.iter,
        residual: norm,
        factorizations: solver.factorizations,
        timings: solver.timings,
        wall_time: start.elapsed().max(Duration::from_nanos(1)),
    })
}
