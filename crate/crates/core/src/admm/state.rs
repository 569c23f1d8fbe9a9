use nalgebra::DVector;

use crate::precond::ScaledData;

/// All ADMM iterates, in the scaled variables.
///
/// Per-level vectors are indexed by level; the split and multiplier blocks
/// of the last level and the `λ` blocks of levels without one are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub x: DVector<f64>,
    pub x_tilde: DVector<f64>,
    pub v: Vec<DVector<f64>>,
    pub lambda: Vec<DVector<f64>>,
    pub z: Vec<DVector<f64>>,
    pub lambda_tilde: Vec<DVector<f64>>,
    pub mu: Vec<DVector<f64>>,
    pub eta: Vec<DVector<f64>>,
    pub phi: Vec<DVector<f64>>,
    pub nu: Vec<DVector<f64>>,
    /// Projection multiplier per level from the last split update.
    pub theta: Vec<f64>,
    /// Over-relaxed `v` and `λ` used by the last split update.
    pub v_relaxed: Vec<DVector<f64>>,
    pub lambda_relaxed: Vec<DVector<f64>>,
    pub rho: f64,
    /// Step size the reduced matrix was last factorized with.
    pub rho_kkt: f64,
    pub iter: usize,
}

impl AdmmState {
    pub fn zeros(data: &ScaledData, rho: f64) -> Self {
        let p = data.p;
        let split = |l: usize, len: usize| DVector::zeros(if l + 1 < p { len } else { 0 });
        let lam = |l: usize| DVector::zeros(if data.has_lambda(l) { data.n_dual(l) } else { 0 });
        let v: Vec<DVector<f64>> = (0..p).map(|l| DVector::zeros(data.m(l))).collect();
        let lambda: Vec<DVector<f64>> = (0..p).map(lam).collect();
        Self {
            x: DVector::zeros(data.n),
            x_tilde: DVector::zeros(data.n),
            z: (0..p).map(|l| split(l, data.m(l))).collect(),
            lambda_tilde: lambda.clone(),
            mu: v.clone(),
            eta: (0..p).map(|l| split(l, data.n)).collect(),
            phi: (0..p).map(|l| split(l, data.m(l))).collect(),
            nu: lambda.clone(),
            theta: vec![0.0; p],
            v_relaxed: (0..p).map(|l| split(l, data.m(l))).collect(),
            lambda_relaxed: lambda.clone(),
            v,
            lambda,
            rho,
            rho_kkt: rho,
            iter: 0,
        }
    }

    /// Whether all blocks have the sizes `data` requires.
    pub fn fits(&self, data: &ScaledData) -> bool {
        let p = data.p;
        let empty = |l| l + 1 >= p;
        let ok_len = |blocks: &[DVector<f64>], len: &dyn Fn(usize) -> usize| {
            blocks.len() == p && blocks.iter().enumerate().all(|(l, b)| b.len() == len(l))
        };
        let m = |l| data.m(l);
        let split_m = |l| if empty(l) { 0 } else { data.m(l) };
        let split_n = |l| if empty(l) { 0 } else { data.n };
        let lam = |l| if data.has_lambda(l) { data.n_dual(l) } else { 0 };
        self.x.len() == data.n
            && self.x_tilde.len() == data.n
            && ok_len(&self.v, &m)
            && ok_len(&self.mu, &m)
            && ok_len(&self.z, &split_m)
            && ok_len(&self.phi, &split_m)
            && ok_len(&self.eta, &split_n)
            && ok_len(&self.lambda, &lam)
            && ok_len(&self.lambda_tilde, &lam)
            && ok_len(&self.nu, &lam)
            && self.theta.len() == p
    }
}
