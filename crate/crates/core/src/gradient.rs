//! Sensitivities of the dual hierarchy's solution with respect to `A` and `b`.
//!
//! The KKT conditions are differentiated at a converged interior-point
//! solution; one linear solve per perturbed entry gives the full
//! differential `dψ`, including `dx`.

use nalgebra::{DMatrix, DVector};

use crate::error::{HlspError, Result};
use crate::ipm::{IpmConfig, IpmSolver};
use crate::problem::HlspProblem;

/// Multipliers below this are treated as inactive.
pub const THETA_INACTIVE: f64 = 1e-8;
/// Largest KKT residual accepted for a point.
pub const POINT_TOLERANCE: f64 = 1e-6;
/// Relative singular-value cut of the minimum-norm solve.
pub const SINGULAR_CUT: f64 = 1e-9;

/// Primal-dual point of the dual hierarchy; blocks a level does not own are
/// empty (or zero for `theta`).
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: DVector<f64>,
    pub v: Vec<DVector<f64>>,
    pub mu: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
    pub theta: Vec<f64>,
    pub lambda: Vec<DVector<f64>>,
}

/// Offsets of the blocks of `dψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffLayout {
    pub n: usize,
    pub p: usize,
    pub v: Vec<usize>,
    pub mu: Vec<usize>,
    pub theta: Vec<usize>,
    pub eta: Vec<usize>,
    pub lambda: Vec<Option<usize>>,
    pub dim: usize,
}

impl DiffLayout {
    pub fn new(problem: &HlspProblem) -> Self {
        let (n, p) = (problem.n_x, problem.p());
        let mut at = n;
        let mut take = |len: usize| {
            let o = at;
            at += len;
            o
        };
        let (mut v, mut mu, mut theta, mut eta) = (vec![], vec![], vec![], vec![]);
        for l in 0..p {
            v.push(take(problem.m(l)));
            mu.push(take(problem.m(l)));
            if l + 1 < p {
                theta.push(take(1));
                eta.push(take(n));
            }
        }
        let lambda = (0..p).map(|l| problem.has_lambda(l).then(|| take(problem.n_dual(l)))).collect();
        Self { n, p, v, mu, theta, eta, lambda, dim: at }
    }
}

/// A perturbed problem entry (0-based level, row and column).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    A { level: usize, row: usize, col: usize },
    B { level: usize, row: usize },
}

/// Differential KKT matrix at a point, factorized once.
#[derive(Debug, Clone)]
pub struct DifferentialSystem {
    pub layout: DiffLayout,
    pub dk: DMatrix<f64>,
    pub point: KktPoint,
    /// Levels whose `θ` row was replaced by `dθ = 0`.
    pub inactive: Vec<bool>,
    /// Numerical rank of `dk`.
    pub rank: usize,
    svd: nalgebra::SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    cut: f64,
}

fn gap(problem: &HlspProblem, pt: &KktPoint, l: usize) -> f64 {
    let b = &problem.levels[l].b;
    let mut g = pt.v[l].dot(&(&pt.v[l] + b));
    if problem.has_lambda(l) {
        g += pt.lambda[l].dot(&problem.stacked_b(l));
    }
    g
}

/// Interior-point tolerance used for differentiation points.
pub const POINT_CHI: f64 = 1e-11;

/// Solves the problem with the interior-point method on the unscaled data,
/// at tolerance at most [`POINT_CHI`], and returns its primal-dual point.
pub fn converged_point(problem: &HlspProblem, cfg: &IpmConfig) -> Result<KktPoint> {
    let cfg = IpmConfig { equilibrate: false, chi: cfg.chi.min(POINT_CHI), ..cfg.clone() };
    let mut solver = IpmSolver::new(problem, cfg)?;
    solver.run()?;
    let lay = &solver.layout;
    let psi = &solver.state.psi;
    let seg = |o: usize, len: usize| psi.rows(o, len).into_owned();
    let p = lay.p;
    Ok(KktPoint {
        x: seg(0, lay.n),
        v: (0..p).map(|l| seg(lay.v[l], lay.m[l])).collect(),
        mu: (0..p).map(|l| seg(lay.mu[l], lay.m[l])).collect(),
        eta: (0..p).map(|l| if l + 1 < p { seg(lay.eta[l], lay.n) } else { DVector::zeros(0) }).collect(),
        theta: (0..p).map(|l| if l + 1 < p { psi[lay.theta[l]] } else { 0.0 }).collect(),
        lambda: (0..p).map(|l| lay.lambda[l].map_or(DVector::zeros(0), |o| seg(o, lay.n_dual[l]))).collect(),
    })
}

/// KKT residual of `pt` with complementarity `θ_l · gap_l` and primal
/// feasibility `gap_l ≤ 0`.
pub fn point_residual(problem: &HlspProblem, pt: &KktPoint) -> f64 {
    let p = problem.p();
    let mut sq = 0.0;
    let mut kx = DVector::zeros(problem.n_x);
    for l in 0..p {
        let lv = &problem.levels[l];
        kx += lv.A.tr_mul(&pt.mu[l]);
        sq += (&lv.A * &pt.x - &lv.b - &pt.v[l]).norm_squared();
        if l + 1 == p {
            sq += (&pt.v[l] - &pt.mu[l]).norm_squared();
            continue;
        }
        let th = pt.theta[l];
        sq += (-&pt.mu[l] + th * (2.0 * &pt.v[l] + &lv.b) + &lv.A * &pt.eta[l]).norm_squared();
        let mut keta = lv.A.tr_mul(&pt.v[l]);
        if problem.has_lambda(l) {
            let ap = problem.stacked_a(l);
            keta += ap.tr_mul(&pt.lambda[l]);
            sq += (th * problem.stacked_b(l) + ap * &pt.eta[l]).norm_squared();
        }
        sq += keta.norm_squared();
        let g = gap(problem, pt, l);
        sq += (th * g).powi(2) + g.max(0.0).powi(2);
    }
    (sq + kx.norm_squared()).sqrt()
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

pub fn assemble_differential(problem: &HlspProblem, point: &KktPoint) -> Result<DifferentialSystem> {
    problem.validate()?;
    let layout = DiffLayout::new(problem);
    let (n, p) = (layout.n, layout.p);
    if point.x.len() != n || point.v.len() != p || point.mu.len() != p || point.theta.len() != p {
        return Err(HlspError::DimensionMismatch("KKT point does not match the problem".into()));
    }
    let res = point_residual(problem, point);
    if !(res <= POINT_TOLERANCE) {
        return Err(HlspError::PointNotConverged(res));
    }
    let mut k = DMatrix::zeros(layout.dim, layout.dim);
    let mut inactive = vec![false; p];
    for l in 0..p {
        let lv = &problem.levels[l];
        let m = lv.rows();
        let (ov, om) = (layout.v[l], layout.mu[l]);
        put(&mut k, 0, om, &lv.A.transpose());
        put(&mut k, om, 0, &lv.A);
        put_identity(&mut k, om, ov, m, -1.0);
        put_identity(&mut k, ov, om, m, -1.0);
        if l + 1 == p {
            put_identity(&mut k, ov, ov, m, 1.0);
            continue;
        }
        let (ot, oe) = (layout.theta[l], layout.eta[l]);
        let th = point.theta[l];
        let dg = 2.0 * &point.v[l] + &lv.b;
        put_identity(&mut k, ov, ov, m, 2.0 * th);
        put(&mut k, ov, ot, &DMatrix::from_column_slice(m, 1, dg.as_slice()));
        put(&mut k, ov, oe, &lv.A);
        put(&mut k, oe, ov, &lv.A.transpose());
        if th < THETA_INACTIVE {
            inactive[l] = true;
            k[(ot, ot)] = 1.0;
        } else {
            put(&mut k, ot, ov, &DMatrix::from_row_slice(1, m, (th * &dg).as_slice()));
            k[(ot, ot)] += gap(problem, point, l);
        }
        if let Some(o) = layout.lambda[l] {
            let ap = problem.stacked_a(l);
            let bp = problem.stacked_b(l);
            let nd = bp.len();
            put(&mut k, oe, o, &ap.transpose());
            put(&mut k, o, oe, &ap);
            put(&mut k, o, ot, &DMatrix::from_column_slice(nd, 1, bp.as_slice()));
            if !inactive[l] {
                put(&mut k, ot, o, &DMatrix::from_row_slice(1, nd, (th * &bp).as_slice()));
            }
        }
    }
    let svd = k.clone().svd(true, true);
    let cut = SINGULAR_CUT * svd.singular_values.max();
    let rank = svd.singular_values.iter().filter(|s| **s > cut).count();
    Ok(DifferentialSystem { layout, dk: k, point: point.clone(), inactive, rank, svd, cut })
}

/// Row offset of level `level` inside the stacked block of level `l > level`.
fn stacked_offset(problem: &HlspProblem, level: usize) -> usize {
    (0..level).map(|k| problem.m(k)).sum()
}

/// `dk_ψ` for a unit perturbation of `param`.
pub fn differential_rhs(problem: &HlspProblem, sys: &DifferentialSystem, param: Parameter) -> Result<DVector<f64>> {
    let lay = &sys.layout;
    let pt = &sys.point;
    let p = lay.p;
    let mut r = DVector::zeros(lay.dim);
    match param {
        Parameter::B { level, row } => {
            if level >= p || row >= problem.m(level) {
                return Err(HlspError::DimensionMismatch(format!("no entry b[{level}][{row}]")));
            }
            r[lay.mu[level] + row] += 1.0;
            if level + 1 < p {
                let th = pt.theta[level];
                r[lay.v[level] + row] -= th;
                if !sys.inactive[level] {
                    r[lay.theta[level]] -= th * pt.v[level][row];
                }
            }
            let off = stacked_offset(problem, level) + row;
            for l in level + 1..p {
                if let Some(o) = lay.lambda[l] {
                    let th = pt.theta[l];
                    r[o + off] -= th;
                    if !sys.inactive[l] {
                        r[lay.theta[l]] -= th * pt.lambda[l][off];
                    }
                }
            }
        }
        Parameter::A { level, row, col } => {
            if level >= p || row >= problem.m(level) || col >= lay.n {
                return Err(HlspError::DimensionMismatch(format!("no entry A[{level}][{row},{col}]")));
            }
            r[col] -= pt.mu[level][row];
            r[lay.mu[level] + row] -= pt.x[col];
            if level + 1 < p {
                r[lay.v[level] + row] -= pt.eta[level][col];
                r[lay.eta[level] + col] -= pt.v[level][row];
            }
            let off = stacked_offset(problem, level) + row;
            for l in level + 1..p {
                if let Some(o) = lay.lambda[l] {
                    r[lay.eta[l] + col] -= pt.lambda[l][off];
                    r[o + off] -= pt.eta[l][col];
                }
            }
        }
    }
    Ok(r)
}

impl DifferentialSystem {
    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let m = DMatrix::from_column_slice(rhs.len(), 1, rhs.as_slice());
        Ok(self.solve_many(&m)?.column(0).into_owned())
    }

    /// Minimum-norm solution for several right-hand sides against the one
    /// decomposition.
    ///
    /// `dk` is singular whenever a level's duality constraint is active with
    /// `θ > 0`, since its row then repeats the stationarity rows; the
    /// differentials of `x` and `v` are still determined.
    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let d = self.svd.solve(rhs, self.cut).map_err(|e| HlspError::SingularSystem(e.to_string()))?;
        let consistent = (&self.dk * &d - rhs).amax() <= 1e-6 * (1.0 + rhs.amax());
        if !consistent || !d.iter().all(|v| v.is_finite()) {
            return Err(HlspError::SingularSystem("differential KKT system has no solution".into()));
        }
        Ok(d)
    }
}

/// Full differential `dψ` for a unit perturbation of `param`.
pub fn jacobian_wrt(problem: &HlspProblem, sys: &DifferentialSystem, param: Parameter) -> Result<DVector<f64>> {
    sys.solve(&differential_rhs(problem, sys, param)?)
}

/// `∂x/∂b` as an `n_x × Σ m_l` matrix, columns ordered by level then row.
pub fn x_jacobian_b(problem: &HlspProblem, cfg: &IpmConfig) -> Result<DMatrix<f64>> {
    let point = converged_point(problem, cfg)?;
    let sys = assemble_differential(problem, &point)?;
    let params: Vec<Parameter> = (0..problem.p())
        .flat_map(|level| (0..problem.m(level)).map(move |row| Parameter::B { level, row }))
        .collect();
    let mut rhs = DMatrix::zeros(sys.layout.dim, params.len());
    for (j, prm) in params.iter().enumerate() {
        rhs.set_column(j, &differential_rhs(problem, &sys, *prm)?);
    }
    Ok(sys.solve_many(&rhs)?.rows(0, problem.n_x).into_owned())
}
