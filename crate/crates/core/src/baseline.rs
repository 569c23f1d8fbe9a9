//! Sequential nullspace solver for equality-only hierarchies.
//!
//! Level `l` is solved in the nullspace of all processed levels, so it cannot
//! disturb their optima. Rank decisions use singular values relative to the
//! largest one of the processed stack.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::Result;
use crate::problem::{stack_rows, HlspProblem, HlspSolution};

pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NullspaceBasis {
    /// Orthonormal columns spanning the numerical nullspace.
    pub basis: DMatrix<f64>,
    pub rank: usize,
}

/// Full SVD of `a`, padding with zero rows so all right singular vectors are
/// available.
fn full_svd(a: &DMatrix<f64>) -> SVD<f64, nalgebra::Dyn, nalgebra::Dyn> {
    let (m, n) = a.shape();
    if m >= n {
        a.clone().svd(false, true)
    } else {
        let mut padded = DMatrix::zeros(n, n);
        padded.rows_mut(0, m).copy_from(a);
        padded.svd(false, true)
    }
}

/// Nullspace of `rows` at singular-value threshold `tol · σ_max`.
pub fn nullspace_basis(rows: &DMatrix<f64>, tol: f64) -> NullspaceBasis {
    nullspace_with_threshold(rows, tol, None)
}

fn nullspace_with_threshold(rows: &DMatrix<f64>, tol: f64, reference: Option<f64>) -> NullspaceBasis {
    let n = rows.ncols();
    if rows.nrows() == 0 || rows.amax() == 0.0 {
        return NullspaceBasis { basis: DMatrix::identity(n, n), rank: 0 };
    }
    let svd = full_svd(rows);
    let vt = svd.v_t.as_ref().expect("right singular vectors requested");
    let smax = reference.unwrap_or_else(|| svd.singular_values.max());
    let cut = tol * smax;
    let rank = svd.singular_values.iter().filter(|s| **s > cut).count();
    let null: Vec<usize> = (0..n).filter(|&i| svd.singular_values[i] <= cut).collect();
    let basis = DMatrix::from_fn(n, null.len(), |i, j| vt[(null[j], i)]);
    NullspaceBasis { basis, rank }
}

/// Minimum-norm least-squares solution of `a x ≈ b`, discarding singular
/// values at or below `cut`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>, cut: f64) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut x = DVector::zeros(a.ncols());
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s > cut {
            let coef = u.column(k).dot(b) / s;
            x += coef * vt.row(k).transpose();
        }
    }
    x
}

/// Solves the hierarchy level by level, stopping once the processed levels
/// have full rank, and reconstructs the primal-dual blocks from
/// `A_lᵀ v_l + A_∪ᵀ λ_l = 0`.
pub fn solve_sequential(problem: &HlspProblem) -> Result<HlspSolution> {
    problem.validate()?;
    let n = problem.n_x;
    let p = problem.p();
    let mut x = DVector::zeros(n);
    let mut null = DMatrix::<f64>::identity(n, n);
    for l in 0..p {
        if null.ncols() == 0 {
            break;
        }
        let a = &problem.levels[l].A;
        let stacked = problem.stacked_a(l + 1);
        let ref_sv = stacked.clone().svd(false, false).singular_values.max();
        let cut = RANK_TOLERANCE * ref_sv;
        let an = a * &null;
        let r = &problem.levels[l].b - a * &x;
        let z = least_squares(&an, &r, cut);
        x += &null * z;
        null = nullspace_with_threshold(&stacked, RANK_TOLERANCE, Some(ref_sv)).basis;
    }
    let sol = HlspSolution::from_x(problem, x, vec![DVector::zeros(0); p], 0.0);
    let lambda = (0..p)
        .map(|l| {
            if !problem.has_lambda(l) {
                return DVector::zeros(0);
            }
            let a_up = stack_rows(problem.levels[..l].iter().map(|lv| &lv.A), n);
            let rhs = -problem.levels[l].A.tr_mul(&sol.v[l]);
            let at = a_up.transpose();
            let cut = RANK_TOLERANCE * at.clone().svd(false, false).singular_values.max();
            least_squares(&at, &rhs, cut)
        })
        .collect();
    Ok(HlspSolution { lambda, ..sol })
}
