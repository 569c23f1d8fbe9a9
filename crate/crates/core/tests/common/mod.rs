#![allow(dead_code)]

use hlsp::admm::{multiplier_weight, AdmmConfig, AdmmState};
use hlsp::precond::ScaledData;
use nalgebra::{DMatrix, DVector};

/// Unreduced primal system of one ADMM step, assembled densely from the
/// augmented Lagrangian terms `½ w ‖J q + c‖²` over `q = (x, v_0..v_{p−1}, λ_l)`.
pub struct Unreduced {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub v_off: Vec<usize>,
    pub lam_off: Vec<Option<usize>>,
}

pub fn unreduced_system(d: &ScaledData, cfg: &AdmmConfig, st: &AdmmState) -> Unreduced {
    let n = d.n;
    let p = d.p;
    let mut off = n;
    let mut v_off = vec![];
    for l in 0..p {
        v_off.push(off);
        off += d.m(l);
    }
    let mut lam_off = vec![];
    for l in 0..p {
        if d.has_lambda(l) {
            lam_off.push(Some(off));
            off += d.n_dual(l);
        } else {
            lam_off.push(None);
        }
    }
    let dim = off;
    let mut h = DMatrix::zeros(dim, dim);
    let mut g = DVector::zeros(dim);
    let mut add = |j: &DMatrix<f64>, c: &DVector<f64>, w: f64| {
        h += w * j.tr_mul(j);
        g += w * j.tr_mul(c);
    };
    let s = multiplier_weight(cfg, st.rho);
    let ident = |k: usize| DMatrix::<f64>::identity(k, k);

    let mut j = DMatrix::zeros(n, dim);
    j.view_mut((0, 0), (n, n)).copy_from(&ident(n));
    add(&j, &(-&st.x_tilde), cfg.sigma);

    for l in 0..p {
        let m = d.m(l);
        let mut j = DMatrix::zeros(m, dim);
        j.view_mut((0, 0), (m, n)).copy_from(&d.a_hat[l]);
        j.view_mut((0, v_off[l]), (m, m)).copy_from(&(-ident(m)));
        add(&j, &(&st.mu[l] * (s / cfg.rho_mu) - &d.b[l]), cfg.rho_mu);
        if l + 1 == p {
            let mut j = DMatrix::zeros(m, dim);
            j.view_mut((0, v_off[l]), (m, m)).copy_from(&ident(m));
            add(&j, &DVector::zeros(m), 1.0 / st.rho_kkt);
            continue;
        }
        let mut j = DMatrix::zeros(n, dim);
        j.view_mut((0, v_off[l]), (n, m)).copy_from(&d.a_hat[l].transpose());
        if let Some(o) = lam_off[l] {
            j.view_mut((0, o), (n, d.n_dual(l))).copy_from(&d.a_prev[l].transpose());
        }
        add(&j, &(&st.eta[l] * (s / cfg.rho_eta)), cfg.rho_eta);
        let mut j = DMatrix::zeros(m, dim);
        j.view_mut((0, v_off[l]), (m, m)).copy_from(&ident(m));
        add(&j, &(&d.b_hat[l] - &st.z[l] + &st.phi[l] * (s / cfg.rho_phi)), cfg.rho_phi);
        if let Some(o) = lam_off[l] {
            let k = d.n_dual(l);
            let mut j = DMatrix::zeros(k, dim);
            j.view_mut((0, o), (k, k)).copy_from(&ident(k));
            add(&j, &(&st.nu[l] * (s / cfg.rho_nu) - &st.lambda_tilde[l]), cfg.rho_eps);
        }
    }
    Unreduced { h, g, v_off, lam_off }
}

/// Stacks `(x, v, λ)` of a state in the unreduced layout.
pub fn stack_q(u: &Unreduced, st: &AdmmState) -> DVector<f64> {
    let mut q = DVector::zeros(u.g.len());
    q.rows_mut(0, st.x.len()).copy_from(&st.x);
    for (l, o) in u.v_off.iter().enumerate() {
        q.rows_mut(*o, st.v[l].len()).copy_from(&st.v[l]);
    }
    for (l, o) in u.lam_off.iter().enumerate() {
        if let Some(o) = o {
            q.rows_mut(*o, st.lambda[l].len()).copy_from(&st.lambda[l]);
        }
    }
    q
}

/// Random state with all multiplier and split blocks filled.
pub fn random_state(d: &ScaledData, rho: f64, seed: u64) -> AdmmState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut st = AdmmState::zeros(d, rho);
    let mut fill = |v: &mut DVector<f64>| {
        for e in v.iter_mut() {
            *e = rng.random_range(-1.0..1.0);
        }
    };
    fill(&mut st.x_tilde);
    for blocks in [&mut st.mu, &mut st.eta, &mut st.phi, &mut st.nu, &mut st.z, &mut st.lambda_tilde] {
        for b in blocks.iter_mut() {
            fill(b);
        }
    }
    st
}
