use nalgebra::{DMatrix, DVector};

/// Iteration budget and early-exit threshold for [`ruiz_equilibrate`].
pub const RUIZ_ITERATIONS: usize = 15;
pub const RUIZ_TOLERANCE: f64 = 1e-3;

/// Ruiz equilibration: returns `(D_r, D_c)` such that every nonzero row and
/// column of `diag(D_r) · A · diag(D_c)` has ∞-norm close to one.
///
/// Zero rows and columns keep scaling 1.
pub fn ruiz_equilibrate(a: &DMatrix<f64>, iterations: usize) -> (DVector<f64>, DVector<f64>) {
    ruiz_with_tolerance(a, iterations, RUIZ_TOLERANCE)
}

pub fn ruiz_with_tolerance(a: &DMatrix<f64>, iterations: usize, tol: f64) -> (DVector<f64>, DVector<f64>) {
    let (m, n) = a.shape();
    let mut dr = DVector::from_element(m, 1.0);
    let mut dc = DVector::from_element(n, 1.0);
    let mut s = a.clone();
    for _ in 0..iterations {
        let rn: Vec<f64> = (0..m).map(|i| s.row(i).amax()).collect();
        let cn: Vec<f64> = (0..n).map(|j| s.column(j).amax()).collect();
        let dev = rn
            .iter()
            .chain(cn.iter())
            .filter(|v| **v > 0.0)
            .map(|v| (1.0 - v).abs())
            .fold(0.0, f64::max);
        if dev <= tol {
            break;
        }
        let r: Vec<f64> = rn.iter().map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
        let c: Vec<f64> = cn.iter().map(|v| if *v > 0.0 { 1.0 / v.sqrt() } else { 1.0 }).collect();
        for j in 0..n {
            for i in 0..m {
                s[(i, j)] *= r[i] * c[j];
            }
        }
        for i in 0..m {
            dr[i] *= r[i];
        }
        for j in 0..n {
            dc[j] *= c[j];
        }
    }
    (dr, dc)
}
