//! Primal-dual interior-point solver for the dual hierarchy.
//!
//! The duality-gap inequality of every level above the last receives a slack
//! `w_l ≥ 0`, and Newton's method is applied to the perturbed KKT conditions
//! with `θ_l w_l = σμ`. The Newton matrix is factorized as a whole, without
//! eliminating any block.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};

use crate::error::{HlspError, Result};
use crate::precond::{precondition, EquilibrationScaling, ScaledData};
use crate::problem::{HlspProblem, HlspSolution};
use crate::report::{PhaseTimings, SolveReport, SolveStatus};

#[derive(Debug, Clone, PartialEq)]
pub struct IpmConfig {
    pub mu0: f64,
    /// Factor applied to the barrier parameter after each inner solve.
    pub mu_reduction: f64,
    /// Centering factor `σ`.
    pub sigma: f64,
    /// Fraction-to-boundary factor.
    pub tau: f64,
    /// Tolerance on `‖k^IPM‖₂` at `σμ = 0`.
    pub chi: f64,
    /// Inner solves stop once `‖k^IPM‖₂ < inner_factor · σμ`.
    pub inner_factor: f64,
    pub max_iters: usize,
    /// Newton steps without a new best residual before giving up.
    pub stall_iters: usize,
    /// Diagonal regularization added to the primal and subtracted from the
    /// dual rows of the Newton matrix.
    pub reg_primal: f64,
    pub reg_dual: f64,
    pub equilibrate: bool,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            mu0: 1.0,
            mu_reduction: 0.1,
            sigma: 0.1,
            tau: 0.995,
            chi: 1e-7,
            inner_factor: 10.0,
            max_iters: 500,
            stall_iters: 30,
            reg_primal: 1e-9,
            reg_dual: 1e-9,
            equilibrate: false,
        }
    }
}

impl IpmConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.mu0 > 0.0
            && self.mu_reduction > 0.0
            && self.mu_reduction < 1.0
            && self.sigma > 0.0
            && self.tau > 0.0
            && self.tau < 1.0
            && self.chi > 0.0
            && self.inner_factor > 0.0
            && self.reg_primal >= 0.0
            && self.reg_dual >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(HlspError::Parse(format!("invalid interior-point configuration {self:?}")))
        }
    }
}

/// Offsets of the blocks in `ψ`.
///
/// `η`, `θ` and `w` exist for levels above the last; `λ` for the levels that
/// have a primal-dual block.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmLayout {
    pub n: usize,
    pub p: usize,
    pub m: Vec<usize>,
    pub n_dual: Vec<usize>,
    pub v: Vec<usize>,
    pub mu: Vec<usize>,
    pub eta: Vec<usize>,
    pub theta: Vec<usize>,
    pub w: Vec<usize>,
    pub lambda: Vec<Option<usize>>,
    pub dim: usize,
}

impl IpmLayout {
    pub fn new(data: &ScaledData) -> Self {
        let (n, p) = (data.n, data.p);
        let m: Vec<usize> = (0..p).map(|l| data.m(l)).collect();
        let mut at = n;
        let mut take = |len: usize| {
            let o = at;
            at += len;
            o
        };
        let (mut v, mut mu, mut eta, mut theta, mut w) = (vec![], vec![], vec![], vec![], vec![]);
        for &ml in &m[..p - 1] {
            v.push(take(ml));
            mu.push(take(ml));
            eta.push(take(n));
            theta.push(take(1));
            w.push(take(1));
        }
        v.push(take(m[p - 1]));
        mu.push(take(m[p - 1]));
        let lambda = (0..p).map(|l| data.has_lambda(l).then(|| take(data.n_dual(l)))).collect();
        Self { n, p, n_dual: (0..p).map(|l| data.n_dual(l)).collect(), m, v, mu, eta, theta, w, lambda, dim: at }
    }
}

/// Iterate of the interior-point method.
#[derive(Debug, Clone, PartialEq)]
pub struct IpmState {
    pub psi: DVector<f64>,
    pub mu_barrier: f64,
    pub sigma_barrier: f64,
}

impl IpmState {
    /// `x, v, Λ, μ, η = 0` and `θ = w = 1`.
    pub fn initial(layout: &IpmLayout, cfg: &IpmConfig) -> Self {
        let mut psi = DVector::zeros(layout.dim);
        for l in 0..layout.p - 1 {
            psi[layout.theta[l]] = 1.0;
            psi[layout.w[l]] = 1.0;
        }
        Self { psi, mu_barrier: cfg.mu0, sigma_barrier: cfg.sigma }
    }

    pub fn target(&self) -> f64 {
        self.sigma_barrier * self.mu_barrier
    }
}

fn seg(psi: &DVector<f64>, at: usize, len: usize) -> DVector<f64> {
    psi.rows(at, len).into_owned()
}

/// Duality-gap expression `v_lᵀ(v_l + b_l) + λ_lᵀ b_prev` of level `l`.
pub fn level_gap(data: &ScaledData, layout: &IpmLayout, psi: &DVector<f64>, l: usize) -> f64 {
    let v = seg(psi, layout.v[l], layout.m[l]);
    let mut g = v.dot(&(&v + &data.b[l]));
    if let Some(o) = layout.lambda[l] {
        g += seg(psi, o, layout.n_dual[l]).dot(&data.b_prev[l]);
    }
    g
}

/// `k^IPM(ψ)` with complementarity target `target = σμ`.
pub fn ipm_residual(data: &ScaledData, layout: &IpmLayout, psi: &DVector<f64>, target: f64) -> DVector<f64> {
    let (n, p) = (layout.n, layout.p);
    let mut r = DVector::zeros(layout.dim);
    let x = seg(psi, 0, n);
    let mut kx = DVector::zeros(n);
    for l in 0..p {
        kx += data.a_hat[l].tr_mul(&seg(psi, layout.mu[l], layout.m[l]));
    }
    r.rows_mut(0, n).copy_from(&kx);
    for l in 0..p {
        let ml = layout.m[l];
        let v = seg(psi, layout.v[l], ml);
        let mu = seg(psi, layout.mu[l], ml);
        let a = &data.a_hat[l];
        let slack = a * &x - &data.b[l] - &v;
        r.rows_mut(layout.mu[l], ml).copy_from(&slack);
        if l + 1 == p {
            r.rows_mut(layout.v[l], ml).copy_from(&(&v - &mu));
            continue;
        }
        let eta = seg(psi, layout.eta[l], n);
        let th = psi[layout.theta[l]];
        let w = psi[layout.w[l]];
        let kv = -&mu + th * (2.0 * &v + &data.b[l]) + a * &eta;
        r.rows_mut(layout.v[l], ml).copy_from(&kv);
        let mut keta = a.tr_mul(&v);
        if let Some(o) = layout.lambda[l] {
            let lam = seg(psi, o, layout.n_dual[l]);
            keta += data.a_prev[l].tr_mul(&lam);
            let klam = th * &data.b_prev[l] + &data.a_prev[l] * &eta;
            r.rows_mut(o, layout.n_dual[l]).copy_from(&klam);
        }
        r.rows_mut(layout.eta[l], n).copy_from(&keta);
        r[layout.theta[l]] = level_gap(data, layout, psi, l) + w;
        r[layout.w[l]] = th * w - target;
    }
    r
}

fn put(k: &mut DMatrix<f64>, r: usize, c: usize, block: &DMatrix<f64>) {
    let mut view = k.view_mut((r, c), block.shape());
    view += block;
}

fn put_identity(k: &mut DMatrix<f64>, r: usize, c: usize, len: usize, s: f64) {
    for i in 0..len {
        k[(r + i, c + i)] += s;
    }
}

/// Jacobian `K^IPM = ∇_ψ k^IPM` at `psi`, without regularization.
pub fn ipm_jacobian(data: &ScaledData, layout: &IpmLayout, psi: &DVector<f64>) -> DMatrix<f64> {
    let p = layout.p;
    let mut k = DMatrix::zeros(layout.dim, layout.dim);
    for l in 0..p {
        let ml = layout.m[l];
        let a = &data.a_hat[l];
        let (ov, omu) = (layout.v[l], layout.mu[l]);
        put(&mut k, 0, omu, &a.transpose());
        put(&mut k, omu, 0, a);
        put_identity(&mut k, omu, ov, ml, -1.0);
        put_identity(&mut k, ov, omu, ml, -1.0);
        if l + 1 == p {
            put_identity(&mut k, ov, ov, ml, 1.0);
            continue;
        }
        let (oe, ot, ow) = (layout.eta[l], layout.theta[l], layout.w[l]);
        let th = psi[ot];
        let w = psi[ow];
        let dg = 2.0 * seg(psi, ov, ml) + &data.b[l];
        put_identity(&mut k, ov, ov, ml, 2.0 * th);
        put(&mut k, ov, ot, &DMatrix::from_column_slice(ml, 1, dg.as_slice()));
        put(&mut k, ov, oe, a);
        put(&mut k, oe, ov, &a.transpose());
        put(&mut k, ot, ov, &DMatrix::from_row_slice(1, ml, dg.as_slice()));
        k[(ot, ow)] += 1.0;
        k[(ow, ot)] += w;
        k[(ow, ow)] += th;
        if let Some(o) = layout.lambda[l] {
            let nd = layout.n_dual[l];
            let bp = &data.b_prev[l];
            put(&mut k, oe, o, &data.a_prev[l].transpose());
            put(&mut k, ot, o, &DMatrix::from_row_slice(1, nd, bp.as_slice()));
            put(&mut k, o, ot, &DMatrix::from_column_slice(nd, 1, bp.as_slice()));
            put(&mut k, o, oe, &data.a_prev[l]);
        }
    }
    k
}

/// Regularization diagonal: `+reg_primal` on `x` and `λ`, `−reg_dual` on
/// `μ`, `η` and `θ`.
pub fn regularization(layout: &IpmLayout, cfg: &IpmConfig) -> DVector<f64> {
    let mut d = DVector::zeros(layout.dim);
    d.rows_mut(0, layout.n).fill(cfg.reg_primal);
    for l in 0..layout.p {
        d.rows_mut(layout.mu[l], layout.m[l]).fill(-cfg.reg_dual);
        if l + 1 < layout.p {
            d.rows_mut(layout.eta[l], layout.n).fill(-cfg.reg_dual);
            d[layout.theta[l]] = -cfg.reg_dual;
        }
        if let Some(o) = layout.lambda[l] {
            d.rows_mut(o, layout.n_dual[l]).fill(cfg.reg_primal);
        }
    }
    d
}

/// `(K^IPM, k^IPM)` at the state's barrier target.
pub fn assemble_ipm_kkt(data: &ScaledData, layout: &IpmLayout, state: &IpmState) -> Result<(DMatrix<f64>, DVector<f64>)> {
    if state.psi.len() != layout.dim {
        return Err(HlspError::DimensionMismatch(format!(
            "state has {} entries, layout needs {}",
            state.psi.len(),
            layout.dim
        )));
    }
    Ok((ipm_jacobian(data, layout, &state.psi), ipm_residual(data, layout, &state.psi, state.target())))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmStep {
    pub alpha: f64,
    pub step_norm: f64,
    pub assemble: Duration,
    pub solve: Duration,
}

/// One damped Newton step at the current barrier target.
pub fn ipm_step(data: &ScaledData, layout: &IpmLayout, state: &mut IpmState, cfg: &IpmConfig) -> Result<IpmStep> {
    let t = Instant::now();
    let (mut k, r) = assemble_ipm_kkt(data, layout, state)?;
    k.set_diagonal(&(k.diagonal() + regularization(layout, cfg)));
    let t1 = Instant::now();
    let d = k
        .lu()
        .solve(&(-r))
        .filter(|d| d.iter().all(|v| v.is_finite()))
        .ok_or_else(|| HlspError::SingularSystem("interior-point Newton matrix".into()))?;
    let mut alpha: f64 = 1.0;
    for l in 0..layout.p - 1 {
        for i in [layout.theta[l], layout.w[l]] {
            if d[i] < 0.0 {
                alpha = alpha.min(-cfg.tau * state.psi[i] / d[i]);
            }
        }
    }
    state.psi.axpy(alpha, &d, 1.0);
    Ok(IpmStep { alpha, step_norm: d.norm(), assemble: t1 - t, solve: t1.elapsed() })
}

/// Interior-point solver over a possibly equilibrated problem.
#[derive(Debug, Clone)]
pub struct IpmSolver {
    pub config: IpmConfig,
    pub scaling: EquilibrationScaling,
    pub data: ScaledData,
    pub layout: IpmLayout,
    pub state: IpmState,
    pub iterations: usize,
    pub timings: PhaseTimings,
}

impl IpmSolver {
    pub fn new(problem: &HlspProblem, config: IpmConfig) -> Result<Self> {
        config.validate()?;
        problem.validate()?;
        let scaling = if config.equilibrate {
            precondition(problem)?.1
        } else {
            EquilibrationScaling::identity(problem)
        };
        let data = ScaledData::new(problem, &scaling);
        let layout = IpmLayout::new(&data);
        let state = IpmState::initial(&layout, &config);
        Ok(Self { config, scaling, data, layout, state, iterations: 0, timings: PhaseTimings::default() })
    }

    /// `‖k^IPM‖₂` at `σμ = 0`.
    pub fn kkt_norm(&self) -> f64 {
        ipm_residual(&self.data, &self.layout, &self.state.psi, 0.0).norm()
    }

    /// Runs the barrier loop; returns whether the tolerance was reached.
    ///
    /// The best iterate by `kkt_norm` is kept, which also ends runs that
    /// stall at the floor of the barrier schedule.
    pub fn run(&mut self) -> Result<bool> {
        let cfg = self.config.clone();
        let mut best = (self.kkt_norm(), self.state.clone());
        let mut since_best = 0;
        while self.iterations < cfg.max_iters {
            let n0 = ipm_residual(&self.data, &self.layout, &self.state.psi, 0.0).norm();
            if n0 < best.0 {
                best = (n0, self.state.clone());
                since_best = 0;
            }
            if n0 < cfg.chi {
                return Ok(true);
            }
            if since_best > cfg.stall_iters {
                break;
            }
            let target = self.state.target();
            if target > 1e-16 {
                let nr = ipm_residual(&self.data, &self.layout, &self.state.psi, target).norm();
                if nr < cfg.inner_factor * target {
                    self.state.mu_barrier *= cfg.mu_reduction;
                    continue;
                }
            }
            let s = ipm_step(&self.data, &self.layout, &mut self.state, &cfg)?;
            self.timings.kkt += s.assemble;
            self.timings.solve += s.solve;
            self.iterations += 1;
            since_best += 1;
        }
        self.state = best.1;
        Ok(best.0 < cfg.chi)
    }

    pub fn theta(&self) -> Vec<f64> {
        self.layout.theta.iter().map(|&o| self.state.psi[o]).collect()
    }

    /// Current iterate mapped back to the original problem.
    pub fn solution(&self, problem: &HlspProblem) -> HlspSolution {
        let psi = &self.state.psi;
        let x = self.scaling.unscale_x(&seg(psi, 0, self.layout.n));
        let lambda = (0..self.layout.p)
            .map(|l| match self.layout.lambda[l] {
                Some(o) => self.scaling.unscale_lambda(l, &seg(psi, o, self.layout.n_dual[l])),
                None => DVector::zeros(0),
            })
            .collect();
        HlspSolution::from_x(problem, x, lambda, self.kkt_norm())
    }
}

/// Runs the interior-point method until `‖k^IPM‖₂ < χ` at `σμ = 0`.
///
/// Like the ADMM solver, running out of iterations is reported through the
/// status with the best iterate found.
pub fn solve_ipm(problem: &HlspProblem, config: &IpmConfig) -> Result<SolveReport> {
    let start = Instant::now();
    let mut solver = IpmSolver::new(problem, config.clone())?;
    let converged = solver.run()?;
    let solution = solver.solution(problem);
    Ok(SolveReport {
        residual: solution.kkt_residual,
        solution,
        status: if converged { SolveStatus::Converged } else { SolveStatus::MaxIterations },
        iterations: solver.iterations,
        factorizations: solver.iterations,
        timings: solver.timings,
        wall_time: start.elapsed().max(Duration::from_nanos(1)),
    })
}
