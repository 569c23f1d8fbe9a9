use nalgebra::DMatrix;

use super::ldlt::sym_factorize;
use crate::error::{HlspError, Result};

/// Explicit inverses of the nested matrices `M_k = [[M_{k−1}, T_kᵀ], [T_k, U_k]]`.
///
/// Each extension inverts only the Schur complement `U_k − T_k M_{k−1}⁻¹ T_kᵀ`
/// and reuses the previous inverse.
#[derive(Debug, Clone, Default)]
pub struct BlockInverseCache {
    inverses: Vec<DMatrix<f64>>,
    t_blocks: Vec<DMatrix<f64>>,
    u_blocks: Vec<DMatrix<f64>>,
}

impl BlockInverseCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inverses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inverses.is_empty()
    }

    /// Dimension of the most recent `M_k`.
    pub fn dim(&self) -> usize {
        self.inverses.last().map(|m| m.nrows()).unwrap_or(0)
    }

    /// `M_k⁻¹` for the `k`-th extension (0-based).
    pub fn inverse(&self, k: usize) -> &DMatrix<f64> {
        &self.inverses[k]
    }

    pub fn t_block(&self, k: usize) -> &DMatrix<f64> {
        &self.t_blocks[k]
    }

    pub fn u_block(&self, k: usize) -> &DMatrix<f64> {
        &self.u_blocks[k]
    }

    /// Assembles `M_k` from the stored blocks (for checks).
    pub fn assembled(&self, k: usize) -> DMatrix<f64> {
        let n = self.inverses[k].nrows();
        let mut m = DMatrix::zeros(n, n);
        let mut off = 0;
        for j in 0..=k {
            let t = &self.t_blocks[j];
            let u = &self.u_blocks[j];
            let r = u.nrows();
            m.view_mut((off, off), (r, r)).copy_from(u);
            if off > 0 {
                m.view_mut((off, 0), (r, off)).copy_from(t);
                m.view_mut((0, off), (off, r)).copy_from(&t.transpose());
            }
            off += r;
        }
        m
    }

    pub fn extend(&mut self, t: DMatrix<f64>, u: DMatrix<f64>) -> Result<()> {
        extend_block_inverse(self, t, u)
    }
}

/// Appends `M_k⁻¹` to the cache from the blocks `T_k` (`r × n`) and `U_k` (`r × r`).
pub fn extend_block_inverse(cache: &mut BlockInverseCache, t: DMatrix<f64>, u: DMatrix<f64>) -> Result<()> {
    let n = cache.dim();
    let r = u.nrows();
    let level = cache.len();
    if u.ncols() != r || t.nrows() != r || t.ncols() != n {
        return Err(HlspError::DimensionMismatch(format!(
            "T is {}x{}, U is {}x{}, cache dimension {}",
            t.nrows(),
            t.ncols(),
            u.nrows(),
            u.ncols(),
            n
        )));
    }
    let inv = if n == 0 {
        sym_factorize(&u).map_err(|_| HlspError::SchurNotInvertible(level))?.inverse()
    } else {
        let prev = &cache.inverses[level - 1];
        // X = M⁻¹ Tᵀ, Schur = U − T X
        let x = prev * t.transpose();
        let mut schur = &u - &t * &x;
        let st = schur.transpose();
        schur = (schur + st) * 0.5;
        let s_inv = sym_factorize(&schur)
            .map_err(|_| HlspError::SchurNotInvertible(level))?
            .inverse();
        let xs = &x * &s_inv;
        let mut out = DMatrix::zeros(n + r, n + r);
        out.view_mut((0, 0), (n, n)).copy_from(&(prev + &xs * x.transpose()));
        out.view_mut((0, n), (n, r)).copy_from(&(-&xs));
        out.view_mut((n, 0), (r, n)).copy_from(&(-xs.transpose()));
        out.view_mut((n, n), (r, r)).copy_from(&s_inv);
        out
    };
    cache.inverses.push(inv);
    cache.t_blocks.push(t);
    cache.u_blocks.push(u);
    if n > 0 {
        refine_last(cache);
    }
    Ok(())
}

/// One Newton–Schulz step `X ← X + X (I − M X)` on the newest inverse.
///
/// Without it the residual of the recursion grows by roughly the ratio of
/// the largest block entries to the smallest Schur pivot at every level.
fn refine_last(cache: &mut BlockInverseCache) {
    let k = cache.len() - 1;
    let m = cache.assembled(k);
    let x = &cache.inverses[k];
    let dim = m.nrows();
    let r = DMatrix::identity(dim, dim) - &m * x;
    let refined = x + x * r;
    let t = refined.transpose();
    cache.inverses[k] = (refined + t) * 0.5;
}
