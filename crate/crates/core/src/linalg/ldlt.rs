use nalgebra::{DMatrix, DVector};

use crate::error::{HlspError, Result};

/// Unpivoted `L D Lᵀ` factor of a symmetric positive-definite matrix.
///
/// `L` is unit lower triangular and stored in the strict lower part of
/// `packed`; the diagonal of `packed` holds `D`.
#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    packed: DMatrix<f64>,
}

impl SymmetricFactor {
    pub fn dim(&self) -> usize {
        self.packed.nrows()
    }

    pub fn d(&self) -> DVector<f64> {
        self.packed.diagonal()
    }

    pub fn l(&self) -> DMatrix<f64> {
        let n = self.dim();
        DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.packed[(i, j)],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        sym_solve(self, rhs)
    }

    /// Solves in place without dimension checks.
    pub fn solve_mut(&self, x: &mut DVector<f64>) {
        let n = self.dim();
        let f = &self.packed;
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= f[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in 0..n {
            x[i] /= f[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= f[(k, i)] * x[k];
            }
            x[i] = s;
        }
    }

    /// Explicit inverse, column by column.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut inv = DMatrix::identity(n, n);
        for j in 0..n {
            let mut col = inv.column(j).into_owned();
            self.solve_mut(&mut col);
            inv.set_column(j, &col);
        }
        // symmetrize away round-off
        let t = inv.transpose();
        (inv + t) * 0.5
    }
}

/// Factorizes `k`; fails when a pivot drops below `1e-13 · max|K|`.
pub fn sym_factorize(k: &DMatrix<f64>) -> Result<SymmetricFactor> {
    let n = k.nrows();
    if k.ncols() != n {
        return Err(HlspError::DimensionMismatch(format!("{}x{} is not square", n, k.ncols())));
    }
    let scale = k.amax();
    let tol = 1e-13 * scale;
    let mut f = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = k[(j, j)];
        for q in 0..j {
            d -= f[(j, q)] * f[(j, q)] * f[(q, q)];
        }
        if !(d > tol) {
            return Err(HlspError::NotPositiveDefinite { index: j, pivot: d });
        }
        f[(j, j)] = d;
        for i in j + 1..n {
            let mut s = k[(i, j)];
            for q in 0..j {
                s -= f[(i, q)] * f[(j, q)] * f[(q, q)];
            }
            f[(i, j)] = s / d;
        }
    }
    Ok(SymmetricFactor { packed: f })
}

pub fn sym_solve(factor: &SymmetricFactor, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != factor.dim() {
        return Err(HlspError::DimensionMismatch(format!(
            "rhs has length {}, factor has dimension {}",
            rhs.len(),
            factor.dim()
        )));
    }
    let mut x = rhs.clone();
    factor.solve_mut(&mut x);
    Ok(x)
}
