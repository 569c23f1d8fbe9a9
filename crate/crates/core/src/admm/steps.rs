use std::time::Duration;

use super::state::AdmmState;
use super::AdmmConfig;
use crate::error::Result;
use crate::precond::ScaledData;
use crate::projection::{project_cubic_timed, project_ipm, ProjectionInput};

/// Over-relaxed split update: forms the candidates of every level above the
/// last and projects them onto the duality-gap set. Returns the time spent
/// in root finding.
pub fn update_splits(data: &ScaledData, cfg: &AdmmConfig, state: &mut AdmmState) -> Result<Duration> {
    let alpha = cfg.alpha;
    let rho = state.rho;
    let mut roots = Duration::ZERO;
    for l in 0..data.p - 1 {
        let b_hat = &data.b_hat[l];
        let vr = alpha * &state.v[l] - (1.0 - alpha) * (b_hat - &state.z[l]);
        let a1 = &vr + b_hat + &state.phi[l] / (rho * cfg.rho_phi);
        let (lr, a2) = if data.has_lambda(l) {
            let lr = alpha * &state.lambda[l] + (1.0 - alpha) * &state.lambda_tilde[l];
            let a2 = &lr + &state.nu[l] / (rho * cfg.rho_nu);
            (lr, a2)
        } else {
            (state.lambda[l].clone(), state.lambda[l].clone())
        };
        let input = ProjectionInput::new(a1, a2, b_hat.clone(), data.b_prev[l].clone());
        let res = if cfg.ipm_projection {
            project_ipm(&input, &cfg.ipm_projection_config)?
        } else {
            let (res, t) = project_cubic_timed(&input)?;
            roots += t;
            res
        };
        state.z[l] = res.z;
        state.lambda_tilde[l] = res.lambda_tilde;
        state.theta[l] = res.theta;
        state.v_relaxed[l] = vr;
        state.lambda_relaxed[l] = lr;
    }
    Ok(roots)
}

/// Dual ascent on the four constraint groups with step `ρ ρ_•`.
pub fn dual_ascent(data: &ScaledData, cfg: &AdmmConfig, state: &mut AdmmState) {
    let rho = state.rho;
    let alpha = cfg.alpha;
    let p = data.p;
    for l in 0..p {
        let r = &data.a_hat[l] * &state.x - &data.b[l] - &state.v[l];
        state.mu[l] += (rho * cfg.rho_mu * alpha) * r;
    }
    for l in 0..p - 1 {
        let mut r = data.a_hat[l].tr_mul(&state.v[l]);
        if data.has_lambda(l) {
            r += data.a_prev[l].tr_mul(&state.lambda[l]);
        }
        state.eta[l] += (rho * cfg.rho_eta * alpha) * r;
        let r = &state.v_relaxed[l] + &data.b_hat[l] - &state.z[l];
        state.phi[l] += (rho * cfg.rho_phi) * r;
        if data.has_lambda(l) {
            let r = &state.lambda_relaxed[l] - &state.lambda_tilde[l];
            state.nu[l] += (rho * cfg.rho_nu) * r;
        }
    }
    state.x_tilde.copy_from(&state.x);
}
