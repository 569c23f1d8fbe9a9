//! Per-level projection onto the duality-gap set
//! `{(z, λ̃) : zᵀz − b̂ᵀb̂ + λ̃ᵀ b_prev ≤ 0}`.
//!
//! The fast path reduces the projection to a cubic in the multiplier θ. The
//! interior-point path handles diagonal scalings of the projection metric
//! without factorizations.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::error::{HlspError, Result};
use crate::linalg::cubic_real_roots;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionInput {
    /// Candidate for `z`.
    pub a1: DVector<f64>,
    /// Candidate for `λ̃`; empty on the first level.
    pub a2: DVector<f64>,
    pub b_hat: DVector<f64>,
    /// Stacked right-hand sides of the levels above; empty on the first level.
    pub b_prev: DVector<f64>,
    /// Diagonal metric on `z`; `None` means identity.
    pub v_phi: Option<DVector<f64>>,
    /// Diagonal metric on `λ̃`; `None` means identity.
    pub v_nu: Option<DVector<f64>>,
}

impl ProjectionInput {
    pub fn new(a1: DVector<f64>, a2: DVector<f64>, b_hat: DVector<f64>, b_prev: DVector<f64>) -> Self {
        Self { a1, a2, b_hat, b_prev, v_phi: None, v_nu: None }
    }

    fn check(&self) -> Result<()> {
        let bad = |what: &str| Err(HlspError::DimensionMismatch(format!("projection input: {what}")));
        if self.a1.len() != self.b_hat.len() {
            return bad("a1 and b_hat differ in length");
        }
        if self.a2.len() != self.b_prev.len() {
            return bad("a2 and b_prev differ in length");
        }
        if let Some(v) = &self.v_phi {
            if v.len() != self.a1.len() || v.iter().any(|s| !(*s > 0.0)) {
                return bad("v_phi must be positive with the length of a1");
            }
        }
        if let Some(v) = &self.v_nu {
            if v.len() != self.a2.len() || v.iter().any(|s| !(*s > 0.0)) {
                return bad("v_nu must be positive with the length of a2");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProjectionPath {
    Cubic,
    Ipm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub z: DVector<f64>,
    pub lambda_tilde: DVector<f64>,
    pub theta: f64,
    pub path: ProjectionPath,
}

/// Constraint value `zᵀz − b̂ᵀb̂ + λ̃ᵀ b_prev`.
pub fn gap_value(z: &DVector<f64>, lambda_tilde: &DVector<f64>, b_hat: &DVector<f64>, b_prev: &DVector<f64>) -> f64 {
    z.norm_squared() - b_hat.norm_squared() + lambda_tilde.dot(b_prev)
}

/// Coefficients `(e1, e2, e3, e4)` of the cubic whose positive root is the
/// projection multiplier, from `d1 = b_prevᵀb_prev`, `d2 = b̂ᵀb̂ − a2ᵀb_prev`,
/// `d3 = a1ᵀa1`.
pub fn cubic_coefficients(d1: f64, d2: f64, d3: f64) -> [f64; 4] {
    [d3 - d2, -d1 - 4.0 * d2, -4.0 * d1 - 4.0 * d2, -4.0 * d1]
}

/// Euclidean projection through the cubic in θ. Requires identity metrics.
pub fn project_cubic(input: &ProjectionInput) -> Result<ProjectionResult> {
    project_cubic_timed(input).map(|(r, _)| r)
}

/// [`project_cubic`] that also reports the time spent in root finding.
pub fn project_cubic_timed(input: &ProjectionInput) -> Result<(ProjectionResult, Duration)> {
    let mut root_time = Duration::ZERO;
    let r = cubic_inner(input, &mut root_time)?;
    Ok((r, root_time))
}

fn cubic_inner(input: &ProjectionInput, root_time: &mut Duration) -> Result<ProjectionResult> {
    input.check()?;
    if input.v_phi.is_some() || input.v_nu.is_some() {
        return Err(HlspError::ProjectionFailure("cubic path requires identity scalings".into()));
    }
    let a1 = &input.a1;
    let a2 = &input.a2;
    let b = &input.b_prev;
    let d1 = b.norm_squared();
    let d2 = input.b_hat.norm_squared() - a2.dot(b);
    let d3 = a1.norm_squared();
    let done = |z: DVector<f64>, lt: DVector<f64>, theta: f64| ProjectionResult {
        z,
        lambda_tilde: lt,
        theta,
        path: ProjectionPath::Cubic,
    };
    let scale = d3.max(input.b_hat.norm_squared()).max(1.0);
    if d3 - d2 <= 1e-13 * scale {
        return Ok(done(a1.clone(), a2.clone(), 0.0));
    }
    // g(θ) = d3/(1+2θ)² − d2 − θ d1, strictly decreasing on θ ≥ 0
    let g = |t: f64| d3 / ((1.0 + 2.0 * t) * (1.0 + 2.0 * t)) - d2 - t * d1;

    if d1 <= 1e-14 * scale {
        // ball of radius sqrt(d2) around the origin, λ̃ unchanged
        if d2 <= 0.0 {
            return Ok(done(DVector::zeros(a1.len()), a2.clone(), f64::INFINITY));
        }
        let r = d2.sqrt();
        let na = d3.sqrt();
        let z = a1 * (r / na);
        let theta = 0.5 * (na / r - 1.0);
        return Ok(done(z, a2.clone(), theta));
    }

    let start = Instant::now();
    let [e1, e2, e3, e4] = cubic_coefficients(d1, d2, d3);
    let roots = cubic_real_roots(e1, e2, e3, e4)?;
    let objective = |t: f64| {
        let s = 2.0 * t / (1.0 + 2.0 * t);
        0.5 * (s * s * d3 + t * t * d1)
    };
    let mut best: Option<(f64, f64)> = None;
    for t in roots.into_iter().map(|t| t.max(0.0)) {
        let t = refine_root(&g, t, d1, d3);
        if g(t) <= 1e-10 * scale {
            let f = objective(t);
            if best.is_none_or(|(_, fb)| f < fb) {
                best = Some((t, f));
            }
        }
    }
    let theta = match best {
        Some((t, _)) => t,
        None => bisect_root(&g).ok_or_else(|| HlspError::ProjectionFailure("no feasible root".into()))?,
    };
    *root_time += start.elapsed();
    let z = a1 / (1.0 + 2.0 * theta);
    let lt = a2 - b * theta;
    Ok(done(z, lt, theta))
}

/// Newton polish of a root of the decreasing function `g`, then a nudge to the
/// feasible side.
fn refine_root(g: &impl Fn(f64) -> f64, t0: f64, d1: f64, d3: f64) -> f64 {
    let dg = |t: f64| -4.0 * d3 / (1.0 + 2.0 * t).powi(3) - d1;
    let mut t = t0;
    for _ in 0..3 {
        let step = g(t) / dg(t);
        let next = (t - step).max(0.0);
        if !next.is_finite() || g(next).abs() >= g(t).abs() {
            break;
        }
        t = next;
    }
    let mut bump = f64::EPSILON * t.max(1e-300);
    for _ in 0..8 {
        if g(t) <= 0.0 {
            break;
        }
        t += bump;
        bump *= 4.0;
    }
    t
}

fn bisect_root(g: &impl Fn(f64) -> f64) -> Option<f64> {
    let mut hi = 1.0;
    let mut k = 0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        k += 1;
        if k > 2000 {
            return None;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(hi)
}

/// Settings of the factorization-free interior-point projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpmProjectionConfig {
    pub mu0: f64,
    pub reduction: f64,
    pub tau: f64,
    pub xi: f64,
    pub max_iters: usize,
}

impl Default for IpmProjectionConfig {
    fn default() -> Self {
        Self { mu0: 1.0, reduction: 0.2, tau: 0.995, xi: 1e-10, max_iters: 500 }
    }
}

/// Projection in the metric `diag(V_φ, V_ν)` by a primal-dual Newton iteration
/// on the log-barrier problem. Each step eliminates everything but the scalar
/// Δθ, so no matrix is factorized.
pub fn project_ipm(input: &ProjectionInput, cfg: &IpmProjectionConfig) -> Result<ProjectionResult> {
    input.check()?;
    let m = input.a1.len();
    let k = input.a2.len();
    let vphi = input.v_phi.clone().unwrap_or_else(|| DVector::from_element(m, 1.0));
    let vnu = input.v_nu.clone().unwrap_or_else(|| DVector::from_element(k, 1.0));
    let b = &input.b_prev;
    let bhh = input.b_hat.norm_squared();
    let vphi2 = vphi.map(|s| s * s);
    let vnu2 = vnu.map(|s| s * s);
    // V ā with ā = V a
    let va1 = vphi2.component_mul(&input.a1);
    let va2 = vnu2.component_mul(&input.a2);

    let mut theta = 1.0;
    let mut w = 1.0;
    let mut z = va1.zip_map(&vphi2, |a, d| a / (d + 2.0 * theta));
    let mut lt = DVector::from_fn(k, |i, _| (va2[i] - theta * b[i]) / vnu2[i]);
    let mut mu = cfg.mu0;

    let residual = |z: &DVector<f64>, lt: &DVector<f64>, theta: f64, w: f64, target: f64| {
        let kz = DVector::from_fn(m, |i, _| (vphi2[i] + 2.0 * theta) * z[i] - va1[i]);
        let kl = DVector::from_fn(k, |i, _| vnu2[i] * lt[i] - va2[i] + theta * b[i]);
        let kw = theta * w - target;
        let kt = z.norm_squared() - bhh + lt.dot(b) + w;
        (kz, kl, kw, kt)
    };
    let norm = |r: &(DVector<f64>, DVector<f64>, f64, f64)| {
        (r.0.norm_squared() + r.1.norm_squared() + r.2 * r.2 + r.3 * r.3).sqrt()
    };

    for _ in 0..cfg.max_iters {
        if norm(&residual(&z, &lt, theta, w, 0.0)) <= cfg.xi {
            return Ok(ProjectionResult { z, lambda_tilde: lt, theta, path: ProjectionPath::Ipm });
        }
        let r = residual(&z, &lt, theta, w, mu);
        if norm(&r) <= 10.0 * mu && mu > 1e-3 * cfg.xi {
            mu *= cfg.reduction;
            continue;
        }
        let (kz, kl, kw, kt) = r;
        let dinv = vphi2.map(|d| 1.0 / (d + 2.0 * theta));
        let t1 = 4.0 * (0..m).map(|i| z[i] * dinv[i] * z[i]).sum::<f64>()
            + (0..k).map(|i| b[i] * b[i] / vnu2[i]).sum::<f64>()
            + w / theta;
        let t2 = -2.0 * (0..m).map(|i| z[i] * dinv[i] * kz[i]).sum::<f64>()
            - (0..k).map(|i| b[i] * kl[i] / vnu2[i]).sum::<f64>()
            - kw / theta
            + kt;
        let dth = t2 / t1;
        let dz = DVector::from_fn(m, |i, _| dinv[i] * (-2.0 * z[i] * dth - kz[i]));
        let dw = (-w * dth - kw) / theta;
        let dl = DVector::from_fn(k, |i, _| (-b[i] * dth - kl[i]) / vnu2[i]);
        let mut alpha: f64 = 1.0;
        if dth < 0.0 {
            alpha = alpha.min(-cfg.tau * theta / dth);
        }
        if dw < 0.0 {
            alpha = alpha.min(-cfg.tau * w / dw);
        }
        z += dz * alpha;
        lt += dl * alpha;
        theta += alpha * dth;
        w += alpha * dw;
    }
    Err(HlspError::MaxItersExceeded(cfg.max_iters))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    /// Bisection on the monotone constraint value along the KKT curve.
    fn oracle(inp: &ProjectionInput) -> (DVector<f64>, DVector<f64>, f64) {
        let m = inp.a1.len();
        let k = inp.a2.len();
        let vp = inp.v_phi.clone().unwrap_or_else(|| DVector::from_element(m, 1.0));
        let vn = inp.v_nu.clone().unwrap_or_else(|| DVector::from_element(k, 1.0));
        let at = |t: f64| {
            let z = DVector::from_fn(m, |i, _| vp[i] * vp[i] * inp.a1[i] / (vp[i] * vp[i] + 2.0 * t));
            let l = DVector::from_fn(k, |i, _| (vn[i] * inp.a2[i] * vn[i] - t * inp.b_prev[i]) / (vn[i] * vn[i]));
            let g = gap_value(&z, &l, &inp.b_hat, &inp.b_prev);
            (z, l, g)
        };
        if at(0.0).2 <= 0.0 {
            let (z, l, _) = at(0.0);
            return (z, l, 0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while at(hi).2 > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if at(mid).2 > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let (z, l, _) = at(hi);
        (z, l, hi)
    }

    #[test]
    fn inactive_constraint_returns_input() {
        let inp = ProjectionInput::new(v(&[0.1]), v(&[0.0]), v(&[1.0]), v(&[1.0]));
        let r = project_cubic(&inp).unwrap();
        assert_eq!(r.z, inp.a1);
        assert_eq!(r.lambda_tilde, inp.a2);
        assert_eq!(r.theta, 0.0);
    }

    #[test]
    fn first_level_ball() {
        let inp = ProjectionInput::new(v(&[2.0]), v(&[]), v(&[1.0]), v(&[]));
        let r = project_cubic(&inp).unwrap();
        assert!((r.z[0] - 1.0).abs() < 1e-15);
        assert!((r.theta - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radial_projection_on_first_level() {
        let inp = ProjectionInput::new(v(&[3.0, 4.0]), v(&[]), v(&[1.0, 0.0]), v(&[]));
        let r = project_cubic(&inp).unwrap();
        assert!((r.z.clone() - v(&[0.6, 0.8])).amax() < 1e-15);
    }

    #[test]
    fn second_level_matches_bisection() {
        let inp = ProjectionInput::new(v(&[1.0]), v(&[1.0]), v(&[0.5]), v(&[2.0]));
        let r = project_cubic(&inp).unwrap();
        let (z, l, t) = oracle(&inp);
        assert!((r.z.clone() - z).amax() < 1e-8);
        assert!((r.lambda_tilde.clone() - l).amax() < 1e-8);
        assert!((r.theta - t).abs() < 1e-8);
        assert!(gap_value(&r.z, &r.lambda_tilde, &inp.b_hat, &inp.b_prev) <= 1e-10);
    }

    #[test]
    fn ipm_agrees_with_cubic() {
        let inp = ProjectionInput::new(v(&[1.0]), v(&[1.0]), v(&[0.5]), v(&[2.0]));
        let c = project_cubic(&inp).unwrap();
        let i = project_ipm(&inp, &IpmProjectionConfig::default()).unwrap();
        assert_eq!(i.path, ProjectionPath::Ipm);
        assert!((c.z - i.z).amax() < 1e-6);
        assert!((c.lambda_tilde - i.lambda_tilde).amax() < 1e-6);
        assert!((c.theta - i.theta).abs() < 1e-6);
    }

    #[test]
    fn ipm_interior_input() {
        let inp = ProjectionInput::new(v(&[0.1, 0.2]), v(&[0.3]), v(&[1.0, 1.0]), v(&[0.5]));
        let cfg = IpmProjectionConfig::default();
        let r = project_ipm(&inp, &cfg).unwrap();
        assert!(r.theta <= cfg.xi);
        assert!((r.z - inp.a1).amax() < 1e-9);
    }

    #[test]
    fn ipm_scaled_metric_matches_bisection() {
        let mut inp = ProjectionInput::new(v(&[2.0]), v(&[]), v(&[1.0]), v(&[]));
        inp.v_phi = Some(v(&[2.0]));
        let r = project_ipm(&inp, &IpmProjectionConfig::default()).unwrap();
        let (z, _, t) = oracle(&inp);
        assert!((r.z[0] - z[0]).abs() < 1e-6);
        assert!((r.theta - t).abs() < 1e-6);
        assert!(project_cubic(&inp).is_err());
    }

    #[test]
    fn idempotent() {
        let inp = ProjectionInput::new(v(&[1.5, -0.7]), v(&[0.4, 2.0]), v(&[0.3, 0.2]), v(&[1.0, -0.5]));
        let r = project_cubic(&inp).unwrap();
        let again = project_cubic(&ProjectionInput::new(r.z.clone(), r.lambda_tilde.clone(), inp.b_hat.clone(), inp.b_prev.clone())).unwrap();
        assert_eq!(again.theta, 0.0);
        assert_eq!(again.z, r.z);
    }
}
