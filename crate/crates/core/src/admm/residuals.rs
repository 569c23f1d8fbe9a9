use nalgebra::DVector;

use super::state::AdmmState;
use super::AdmmConfig;
use crate::precond::ScaledData;

/// Norms of the primal and dual residuals of the split problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    /// `‖k_prim‖₂` over `[Âx − b − v (all levels); Â_lᵀv_l + Ā_∪ᵀλ_l; v_l + b̂_l − z_l; λ_l − λ̃_l]`.
    pub prim: f64,
    /// `‖k_dual‖₂` over `[Σ Â_lᵀμ_l; −μ_l + Â_lη_l + φ_l; v_p − μ_p; Ā_∪η_l + ν_l]`.
    pub dual: f64,
    pub prim_inf: f64,
    pub dual_inf: f64,
    /// `‖k_prim, k_dual‖₂`.
    pub norm: f64,
    /// `max(‖Bq − c‖∞, ‖Cs‖∞)`, the primal normalization of the step-size rule.
    pub prim_scale: f64,
    /// `max(‖v_p‖∞, ‖Bᵀy‖∞)`.
    pub dual_scale: f64,
}

#[derive(Default)]
struct Acc {
    sq: f64,
    inf: f64,
}

impl Acc {
    fn add(&mut self, v: &DVector<f64>) {
        for x in v.iter() {
            self.sq += x * x;
            self.inf = self.inf.max(x.abs());
        }
    }
}

fn amax(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m: f64, x| m.max(x.abs()))
}

pub fn compute_residuals(data: &ScaledData, state: &AdmmState) -> Residuals {
    let p = data.p;
    let mut prim = Acc::default();
    let mut dual = Acc::default();
    // ‖Bq − c‖∞, ‖Cs‖∞ and ‖Bᵀy‖∞
    let (mut bqc, mut cs, mut bty) = (0.0f64, 0.0f64, 0.0f64);

    let mut sum_mu = DVector::zeros(data.n);
    for l in 0..p {
        let a = &data.a_hat[l];
        let slack = a * &state.x - &data.b[l] - &state.v[l];
        prim.add(&slack);
        bqc = bqc.max(amax(&slack));
        sum_mu.gemv_tr(1.0, a, &state.mu[l], 1.0);
        if l + 1 == p {
            let last = &state.v[l] - &state.mu[l];
            dual.add(&last);
            bty = bty.max(amax(&state.mu[l]));
            continue;
        }
        let mut stat = a.tr_mul(&state.v[l]);
        if data.has_lambda(l) {
            stat.gemv_tr(1.0, &data.a_prev[l], &state.lambda[l], 1.0);
        }
        prim.add(&stat);
        bqc = bqc.max(amax(&stat));
        let shifted = &state.v[l] + &data.b_hat[l];
        bqc = bqc.max(amax(&shifted));
        cs = cs.max(amax(&state.z[l]));
        prim.add(&(shifted - &state.z[l]));
        let mut dv = &state.phi[l] - &state.mu[l];
        dv.gemv(1.0, a, &state.eta[l], 1.0);
        dual.add(&dv);
        bty = bty.max(amax(&dv));
        if data.has_lambda(l) {
            bqc = bqc.max(amax(&state.lambda[l]));
            cs = cs.max(amax(&state.lambda_tilde[l]));
            prim.add(&(&state.lambda[l] - &state.lambda_tilde[l]));
            let mut dl = state.nu[l].clone();
            dl.gemv(1.0, &data.a_prev[l], &state.eta[l], 1.0);
            dual.add(&dl);
            bty = bty.max(amax(&dl));
        }
    }
    dual.add(&sum_mu);
    bty = bty.max(amax(&sum_mu));

    Residuals {
        prim: prim.sq.sqrt(),
        dual: dual.sq.sqrt(),
        prim_inf: prim.inf,
        dual_inf: dual.inf,
        norm: (prim.sq + dual.sq).sqrt(),
        prim_scale: bqc.max(cs),
        dual_scale: amax(&state.v[p - 1]).max(bty),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoUpdate {
    pub rho: f64,
    pub refactor: bool,
}

/// Step-size rule balancing the normalized primal and dual residuals.
///
/// `rho_fact` is the value the reduced matrix was last factorized with; the
/// refactorization flag fires when the proposal leaves
/// `[rho_fact / ratio, rho_fact · ratio]`.
pub fn update_rho(rho: f64, rho_fact: f64, res: &Residuals, cfg: &AdmmConfig) -> RhoUpdate {
    let guard = 1e-12;
    let kp = res.prim_inf;
    let kd = res.dual_inf;
    if res.prim_scale < guard || res.dual_scale < guard || kd / res.dual_scale < guard {
        return RhoUpdate { rho, refactor: false };
    }
    let ratio = (kp / res.prim_scale) / (kd / res.dual_scale);
    let proposed = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
    rho_decision(proposed, rho_fact, cfg.refactor_ratio)
}

/// Refactorization decision for a proposed step size.
pub fn rho_decision(proposed: f64, rho_fact: f64, ratio: f64) -> RhoUpdate {
    RhoUpdate { rho: proposed, refactor: proposed > ratio * rho_fact || proposed < rho_fact / ratio }
}
