//! Partial Ruiz equilibration of the stacked constraint matrix.
//!
//! Only `A` is equilibrated: `Ā = V_μ A L_x`. The slacks keep their original
//! scale (`L_v = I`), the primal-dual blocks inherit the leading row scalings
//! (`L_ν`), the dual stationarity rows the column scaling (`V_η = L_x`), and
//! the split metrics stay identity so the cubic projection still applies.
//!
//! The solvers see the change of variables `x = L_x x̄`, `λ_l = L_ν,l λ̄_l`.
//! With it the slack constraint reads `A_l L_x x̄ − b_l − v_l = 0` and the
//! stationarity rows `(A_l L_x)ᵀ v_l + Ā_∪ᵀ λ̄_l = 0`, so the problem being
//! solved is exactly the original one.

use nalgebra::{DMatrix, DVector};

use crate::error::{HlspError, Result};
use crate::linalg::{ruiz_equilibrate, RUIZ_ITERATIONS};
use crate::problem::{stack_rows, HlspProblem, HlspSolution, LevelData};

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibrationScaling {
    /// Column scaling of the stacked matrix.
    pub l_x: DVector<f64>,
    /// Row scaling of the stacked matrix.
    pub v_mu: DVector<f64>,
    offsets: Vec<usize>,
}

impl EquilibrationScaling {
    pub fn identity(problem: &HlspProblem) -> Self {
        Self::from_parts(problem, DVector::from_element(problem.n_x, 1.0), DVector::from_element(problem.total_rows(), 1.0))
    }

    fn from_parts(problem: &HlspProblem, l_x: DVector<f64>, v_mu: DVector<f64>) -> Self {
        let offsets = (0..=problem.p()).map(|l| problem.n_dual(l)).collect();
        Self { l_x, v_mu, offsets }
    }

    pub fn is_identity(&self) -> bool {
        self.l_x.iter().chain(self.v_mu.iter()).all(|s| *s == 1.0)
    }

    /// Row scaling of level `l`.
    pub fn v_mu_level(&self, l: usize) -> DVector<f64> {
        self.v_mu.rows(self.offsets[l], self.offsets[l + 1] - self.offsets[l]).into_owned()
    }

    /// `L_ν` block of level `l`: the row scalings of all levels above.
    pub fn l_nu(&self, l: usize) -> DVector<f64> {
        self.v_mu.rows(0, self.offsets[l]).into_owned()
    }

    /// `V_η` block (the same for every level).
    pub fn v_eta(&self) -> &DVector<f64> {
        &self.l_x
    }

    pub fn unscale_x(&self, x_bar: &DVector<f64>) -> DVector<f64> {
        x_bar.component_mul(&self.l_x)
    }

    pub fn unscale_lambda(&self, l: usize, lambda_bar: &DVector<f64>) -> DVector<f64> {
        lambda_bar.component_mul(&self.l_nu(l))
    }

    pub fn unscale_eta(&self, eta_bar: &DVector<f64>) -> DVector<f64> {
        eta_bar.component_mul(&self.l_x)
    }

    pub fn unscale_nu(&self, l: usize, nu_bar: &DVector<f64>) -> DVector<f64> {
        nu_bar.component_div(&self.l_nu(l))
    }
}

/// Runs Ruiz on the stacked `A` and returns `(Ā, b̄)` as a problem together
/// with the scaling.
pub fn precondition(problem: &HlspProblem) -> Result<(HlspProblem, EquilibrationScaling)> {
    problem.validate()?;
    let stacked = problem.stacked_a(problem.p());
    let (dr, dc) = ruiz_equilibrate(&stacked, RUIZ_ITERATIONS);
    let scaling = EquilibrationScaling::from_parts(problem, dc, dr);
    let levels = (0..problem.p())
        .map(|l| {
            let w = scaling.v_mu_level(l);
            let lv = &problem.levels[l];
            LevelData::new(scale_matrix(&lv.A, &w, &scaling.l_x), lv.b.component_mul(&w))
        })
        .collect();
    Ok((HlspProblem { levels, n_x: problem.n_x }, scaling))
}

fn scale_matrix(a: &DMatrix<f64>, rows: &DVector<f64>, cols: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| rows[i] * a[(i, j)] * cols[j])
}

/// Maps a solution in the scaled variables `(x̄, λ̄)` back to the original
/// problem; slacks and objectives are recomputed from `x`.
pub fn unscale_solution(
    original: &HlspProblem,
    scaled: &HlspSolution,
    scaling: &EquilibrationScaling,
) -> Result<HlspSolution> {
    if scaled.x.len() != original.n_x || scaled.lambda.len() != original.p() {
        return Err(HlspError::DimensionMismatch("scaled solution does not match the problem".into()));
    }
    let x = scaling.unscale_x(&scaled.x);
    let lambda = scaled
        .lambda
        .iter()
        .enumerate()
        .map(|(l, lb)| if lb.is_empty() { lb.clone() } else { scaling.unscale_lambda(l, lb) })
        .collect();
    Ok(HlspSolution::from_x(original, x, lambda, scaled.kkt_residual))
}

/// The data a dual solver works with under a scaling.
#[derive(Debug, Clone)]
pub struct ScaledData {
    pub p: usize,
    pub n: usize,
    /// `A_l L_x` (slack constraint and `v` part of the stationarity rows).
    pub a_hat: Vec<DMatrix<f64>>,
    /// `A_l` rows of the levels above, scaled to `Ā`, stacked per level.
    pub a_prev: Vec<DMatrix<f64>>,
    pub b: Vec<DVector<f64>>,
    pub b_hat: Vec<DVector<f64>>,
    /// `b̄` of the levels above, stacked per level.
    pub b_prev: Vec<DVector<f64>>,
    /// `Ā_l`, unstacked.
    pub a_bar: Vec<DMatrix<f64>>,
}

impl ScaledData {
    pub fn new(problem: &HlspProblem, scaling: &EquilibrationScaling) -> Self {
        let p = problem.p();
        let n = problem.n_x;
        let mut a_hat = Vec::with_capacity(p);
        let mut a_bar = Vec::with_capacity(p);
        let mut b_bar = Vec::with_capacity(p);
        for l in 0..p {
            let lv = &problem.levels[l];
            let w = scaling.v_mu_level(l);
            a_hat.push(scale_matrix(&lv.A, &DVector::from_element(lv.rows(), 1.0), &scaling.l_x));
            a_bar.push(scale_matrix(&lv.A, &w, &scaling.l_x));
            b_bar.push(lv.b.component_mul(&w));
        }
        let a_prev = (0..p).map(|l| stack_rows(a_bar[..l].iter(), n)).collect();
        let b_prev = (0..p)
            .map(|l| DVector::from_iterator(problem.n_dual(l), b_bar[..l].iter().flat_map(|b| b.iter().copied())))
            .collect();
        Self {
            p,
            n,
            a_hat,
            a_prev,
            b: problem.levels.iter().map(|lv| lv.b.clone()).collect(),
            b_hat: problem.levels.iter().map(|lv| lv.b_hat()).collect(),
            b_prev,
            a_bar,
        }
    }

    pub fn m(&self, l: usize) -> usize {
        self.b[l].len()
    }

    pub fn n_dual(&self, l: usize) -> usize {
        self.b_prev[l].len()
    }

    pub fn has_lambda(&self, l: usize) -> bool {
        l >= 1 && l + 1 < self.p
    }
}
