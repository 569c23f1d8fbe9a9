//! Reduced KKT system of the primal step.
//!
//! For every level `l < p` the slack `v_l` and the primal-dual block `λ_l`
//! are eliminated in closed form, which leaves an `n_x × n_x` system in `x`.
//! With `G_l = Â_l Ā_∪ᵀ`, `P_l = M_l⁻¹ G_lᵀ` and
//! `S_l = (ρ_μ + ρ_φ) I + ρ_η Â_l Â_lᵀ − ρ_η² G_l P_l` the reduced matrix is
//! `σ I + Σ_{l<p} ρ_μ Â_lᵀ (I − ρ_μ S_l⁻¹) Â_l + ρ_μ/(1 + ρ ρ_μ) Â_pᵀ Â_p`.

use nalgebra::{DMatrix, DVector};

use super::state::AdmmState;
use super::AdmmConfig;
use crate::error::{HlspError, Result};
use crate::linalg::{sym_factorize, BlockInverseCache, SymmetricFactor};
use crate::precond::ScaledData;

/// Per-level elimination matrices; independent of `ρ`.
#[derive(Debug, Clone)]
pub struct LevelElimination {
    pub s_inv: DMatrix<f64>,
    /// `G_l = Â_l Ā_∪ᵀ` (empty on the first level).
    pub g: DMatrix<f64>,
    /// `P_l = M_l⁻¹ G_lᵀ`.
    pub p: DMatrix<f64>,
}

/// `M_l⁻¹` for every level with a primal-dual block plus the elimination
/// matrices of all levels above the last.
#[derive(Debug, Clone)]
pub struct DualCache {
    pub block_inverse: BlockInverseCache,
    pub levels: Vec<LevelElimination>,
    /// How many times the cache was built (constructed once per solve).
    pub builds: usize,
}

impl DualCache {
    /// `M_l⁻¹` of level `l`.
    pub fn m_inv(&self, l: usize) -> &DMatrix<f64> {
        self.block_inverse.inverse(l - 1)
    }
}

pub fn build_dual_cache(data: &ScaledData, cfg: &AdmmConfig) -> Result<DualCache> {
    let p = data.p;
    let mut cache = BlockInverseCache::new();
    // M_{l+1} extends M_l by the rows of level l
    for l in 0..p.saturating_sub(2) {
        let a = &data.a_bar[l];
        let t = cfg.rho_eta * (a * data.a_prev[l].transpose());
        let mut u = cfg.rho_eta * (a * a.transpose());
        for i in 0..u.nrows() {
            u[(i, i)] += cfg.rho_eps;
        }
        cache.extend(t, u)?;
    }
    let mut levels = Vec::with_capacity(p.saturating_sub(1));
    for l in 0..p.saturating_sub(1) {
        let a = &data.a_hat[l];
        let m = data.m(l);
        let mut s = cfg.rho_eta * (a * a.transpose());
        for i in 0..m {
            s[(i, i)] += cfg.rho_mu + cfg.rho_phi;
        }
        let (g, pm) = if data.has_lambda(l) {
            let g = a * data.a_prev[l].transpose();
            let pm = cache.inverse(l - 1) * g.transpose();
            s -= cfg.rho_eta * cfg.rho_eta * (&g * &pm);
            (g, pm)
        } else {
            (DMatrix::zeros(m, 0), DMatrix::zeros(0, m))
        };
        let s = (&s + s.transpose()) * 0.5;
        let s_inv = sym_factorize(&s)?.inverse();
        levels.push(LevelElimination { s_inv, g, p: pm });
    }
    Ok(DualCache { block_inverse: cache, levels, builds: 1 })
}

/// Reduced matrix `K_x` and its factorization at a fixed `ρ`.
#[derive(Debug, Clone)]
pub struct ReducedKkt {
    pub k_x: DMatrix<f64>,
    pub factor: SymmetricFactor,
    pub rho: f64,
}

/// Weight of the last level in `K_x`.
pub fn last_level_weight(cfg: &AdmmConfig, rho: f64) -> f64 {
    cfg.rho_mu / (1.0 + rho * cfg.rho_mu)
}

pub fn assemble_reduced_kkt(data: &ScaledData, cfg: &AdmmConfig, cache: &DualCache, rho: f64) -> Result<ReducedKkt> {
    let n = data.n;
    let p = data.p;
    let mut k = DMatrix::from_diagonal_element(n, n, cfg.sigma);
    for l in 0..p - 1 {
        let a = &data.a_hat[l];
        let inner = cfg.rho_mu * cfg.rho_mu * (&cache.levels[l].s_inv * a);
        k += cfg.rho_mu * a.tr_mul(a) - a.tr_mul(&inner);
    }
    let a = &data.a_hat[p - 1];
    k += last_level_weight(cfg, rho) * a.tr_mul(a);
    let k = (&k + k.transpose()) * 0.5;
    let factor = sym_factorize(&k)?;
    Ok(ReducedKkt { k_x: k, factor, rho })
}

/// Right-hand side of the reduced system and the intermediate vectors the
/// slack and primal-dual recovery reuse.
#[derive(Debug, Clone)]
pub struct ReducedRhs {
    pub k_x: DVector<f64>,
    /// `r_l = S_l⁻¹ g_l` per level above the last.
    pub r: Vec<DVector<f64>>,
    /// `y_l = M_l⁻¹ h_l,dual`; empty where the level has no `λ` block.
    pub y: Vec<DVector<f64>>,
    /// `−b_p + s μ_p / ρ_μ` of the last level.
    pub c_last: DVector<f64>,
}

/// Multiplier weight `s` in the constraint shifts: `1/ρ` when the primal
/// system is the augmented Lagrangian divided by `ρ`, `1` when taken literally.
pub fn multiplier_weight(cfg: &AdmmConfig, rho: f64) -> f64 {
    if cfg.literal_rho { 1.0 } else { 1.0 / rho }
}

pub fn assemble_rhs(data: &ScaledData, cfg: &AdmmConfig, cache: &DualCache, state: &AdmmState) -> Result<ReducedRhs> {
    if !state.fits(data) {
        return Err(HlspError::DimensionMismatch("ADMM state does not match the problem".into()));
    }
    let p = data.p;
    let s = multiplier_weight(cfg, state.rho);
    let mut k_x = cfg.sigma * &state.x_tilde;
    let mut r = Vec::with_capacity(p);
    let mut y = Vec::with_capacity(p);
    for l in 0..p - 1 {
        let a = &data.a_hat[l];
        let lv = &cache.levels[l];
        let c_mu = &state.mu[l] * (s / cfg.rho_mu) - &data.b[l];
        let c_eta = &state.eta[l] * (s / cfg.rho_eta);
        let c_phi = &data.b_hat[l] - &state.z[l] + &state.phi[l] * (s / cfg.rho_phi);
        let mut g = cfg.rho_mu * &c_mu - cfg.rho_eta * (a * &c_eta) - cfg.rho_phi * c_phi;
        if data.has_lambda(l) {
            let c_nu = &state.nu[l] * (s / cfg.rho_nu) - &state.lambda_tilde[l];
            let h_dual = -cfg.rho_eta * (&data.a_prev[l] * &c_eta) - cfg.rho_eps * c_nu;
            let yl = cache.m_inv(l) * h_dual;
            g -= cfg.rho_eta * (&lv.g * &yl);
            y.push(yl);
        } else {
            y.push(DVector::zeros(0));
        }
        let rl = &lv.s_inv * g;
        k_x += cfg.rho_mu * a.tr_mul(&(&rl - &c_mu));
        r.push(rl);
    }
    y.push(DVector::zeros(0));
    let c_last = &state.mu[p - 1] * (s / cfg.rho_mu) - &data.b[p - 1];
    k_x -= last_level_weight(cfg, state.rho_kkt) * data.a_hat[p - 1].tr_mul(&c_last);
    Ok(ReducedRhs { k_x, r, y, c_last })
}

/// Solves `K_x x = k_x`.
pub fn solve_x(kkt: &ReducedKkt, rhs: &ReducedRhs) -> DVector<f64> {
    let mut x = rhs.k_x.clone();
    kkt.factor.solve_mut(&mut x);
    x
}

/// Recovers `v_l` and `λ_l` of every level from `x`.
pub fn recover_slacks(data: &ScaledData, cfg: &AdmmConfig, cache: &DualCache, rhs: &ReducedRhs, state: &mut AdmmState) {
    let p = data.p;
    for l in 0..p - 1 {
        let lv = &cache.levels[l];
        let ax = &data.a_hat[l] * &state.x;
        let v = cfg.rho_mu * (&lv.s_inv * ax) + &rhs.r[l];
        if data.has_lambda(l) {
            state.lambda[l] = &rhs.y[l] - cfg.rho_eta * (&lv.p * &v);
        }
        state.v[l] = v;
    }
    let w = state.rho_kkt * last_level_weight(cfg, state.rho_kkt);
    state.v[p - 1] = w * (&data.a_hat[p - 1] * &state.x + &rhs.c_last);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::precond::EquilibrationScaling;
    use crate::problem::{HlspProblem, LevelData};

    fn scalar_problem(vals: &[(f64, f64)]) -> HlspProblem {
        HlspProblem::new(
            vals.iter()
                .map(|(a, b)| LevelData::new(DMatrix::from_element(1, 1, *a), DVector::from_element(1, *b)))
                .collect(),
        )
        .unwrap()
    }

    fn hand_config() -> AdmmConfig {
        AdmmConfig { rho_mu: 100.0, rho_eta: 10.0, rho_phi: 1.0, rho_nu: 1.0, rho_eps: 1.0, ..Default::default() }
    }

    #[test]
    fn single_level_matrix_and_rhs() {
        let p = scalar_problem(&[(2.0, 1.0)]);
        let d = ScaledData::new(&p, &EquilibrationScaling::identity(&p));
        let cfg = hand_config();
        let cache = build_dual_cache(&d, &cfg).unwrap();
        let kkt = assemble_reduced_kkt(&d, &cfg, &cache, 1.0).unwrap();
        let w = 100.0 / 101.0;
        assert!((kkt.k_x[(0, 0)] - (4.0 * w + cfg.sigma)).abs() < 1e-14);
        let st = AdmmState::zeros(&d, 1.0);
        let rhs = assemble_rhs(&d, &cfg, &cache, &st).unwrap();
        assert!((rhs.k_x[0] - 2.0 * w).abs() < 1e-14);
    }

    #[test]
    fn two_scalar_levels_closed_form() {
        // S = ρ_μ + ρ_φ + ρ_η = 111, K = σ + ρ_μ(1 − ρ_μ/S) + ρ_μ/(1+ρρ_μ)
        let p = scalar_problem(&[(1.0, 0.0), (1.0, 0.0)]);
        let d = ScaledData::new(&p, &EquilibrationScaling::identity(&p));
        let cfg = hand_config();
        let cache = build_dual_cache(&d, &cfg).unwrap();
        let kkt = assemble_reduced_kkt(&d, &cfg, &cache, 1.0).unwrap();
        let expect = 1e-6 + 100.0 * (1.0 - 100.0 / 111.0) + 100.0 / 101.0;
        assert!((kkt.k_x[(0, 0)] - expect).abs() < 1e-12);
    }

    #[test]
    fn homogeneous_rhs_vanishes() {
        let p = crate::problem::generate_full_rank_hierarchy(4, 1).unwrap();
        let zeroed = HlspProblem::new(
            p.levels.iter().map(|lv| LevelData::new(lv.A.clone(), DVector::zeros(lv.rows()))).collect(),
        )
        .unwrap();
        let d = ScaledData::new(&zeroed, &EquilibrationScaling::identity(&zeroed));
        let cfg = AdmmConfig::default();
        let cache = build_dual_cache(&d, &cfg).unwrap();
        let st = AdmmState::zeros(&d, cfg.rho_init);
        let rhs = assemble_rhs(&d, &cfg, &cache, &st).unwrap();
        assert_eq!(rhs.k_x.amax(), 0.0);
        let kkt = assemble_reduced_kkt(&d, &cfg, &cache, cfg.rho_init).unwrap();
        assert_eq!((&kkt.k_x - kkt.k_x.transpose()).amax(), 0.0);
    }
}
