use std::f64::consts::PI;

use crate::error::{HlspError, Result};

fn poly(c: &[f64; 4], t: f64) -> f64 {
    c[0] + t * (c[1] + t * (c[2] + t * c[3]))
}

fn dpoly(c: &[f64; 4], t: f64) -> f64 {
    c[1] + t * (2.0 * c[2] + t * 3.0 * c[3])
}

fn polish(c: &[f64; 4], t: f64) -> f64 {
    let mut t = t;
    for _ in 0..2 {
        let d = dpoly(c, t);
        if d == 0.0 {
            break;
        }
        let next = t - poly(c, t) / d;
        if !next.is_finite() || poly(c, next).abs() >= poly(c, t).abs() {
            break;
        }
        t = next;
    }
    t
}

/// Real roots of `e1 + e2·θ + e3·θ² + e4·θ³`, ascending.
///
/// Falls back to the quadratic and linear formulas when the leading
/// coefficients vanish relative to the largest one.
pub fn cubic_real_roots(e1: f64, e2: f64, e3: f64, e4: f64) -> Result<Vec<f64>> {
    let c = [e1, e2, e3, e4];
    let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return Err(HlspError::AllCoefficientsZero);
    }
    let eps = 1e-14 * scale;
    let mut roots = if e4.abs() > eps {
        let (a, b, cc) = (e3 / e4, e2 / e4, e1 / e4);
        let q = (a * a - 3.0 * b) / 9.0;
        let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * cc) / 54.0;
        let q3 = q * q * q;
        if r * r < q3 {
            let th = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
            let s = -2.0 * q.sqrt();
            vec![
                s * (th / 3.0).cos() - a / 3.0,
                s * ((th + 2.0 * PI) / 3.0).cos() - a / 3.0,
                s * ((th - 2.0 * PI) / 3.0).cos() - a / 3.0,
            ]
        } else {
            let big = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
            let small = if big != 0.0 { q / big } else { 0.0 };
            vec![big + small - a / 3.0]
        }
    } else if e3.abs() > eps {
        let disc = e2 * e2 - 4.0 * e3 * e1;
        if disc < 0.0 {
            vec![]
        } else {
            let q = -0.5 * (e2 + e2.signum() * disc.sqrt());
            if q == 0.0 {
                vec![0.0]
            } else {
                vec![q / e3, e1 / q]
            }
        }
    } else if e2.abs() > eps {
        vec![-e1 / e2]
    } else {
        vec![]
    };
    for t in roots.iter_mut() {
        *t = polish(&c, *t);
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}
