//! Edge extraction: the critical point `xi_-`, the edge `E_- = F(xi_-)` and
//! the scaling factor `gamma_0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::InitialData;

/// `(1/N) sum (V_i - x)^{-k}` for real `x` off the spectrum, k = 1, 2, 3.
fn real_moments(values: &[f64], x: f64) -> [f64; 3] {
    let mut s = [0.0; 3];
    for &v in values {
        let g = 1.0 / (v - x);
        s[0] += g;
        s[1] += g * g;
        s[2] += g * g * g;
    }
    let n = values.len() as f64;
    s.map(|x| x / n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgePoint {
    pub xi_minus: f64,
    pub e_minus: f64,
    /// 0-based index of the spectral point the edge sits to the left of.
    pub anchor: usize,
}

/// Edge left of the first `V_i >= -1/2`.
pub fn find_edge(v: &InitialData, t: f64) -> Result<EdgePoint> {
    let anchor = v
        .anchor_index()
        .ok_or_else(|| Error::NoBracket("no spectral point at or above -1/2".into()))?;
    find_edge_at(v.values(), t, anchor)
}

/// Edge left of `values[anchor]` (sorted `values`): the root of
/// `h(xi) = t (1/N) sum (V_i - xi)^{-2} - 1` in the gap below the anchor.
pub fn find_edge_at(values: &[f64], t: f64, anchor: usize) -> Result<EdgePoint> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("time t = {t} must be positive")));
    }
    if anchor >= values.len() {
        return Err(Error::IndexOverflow(format!("anchor {anchor} beyond N = {}", values.len())));
    }
    let va = values[anchor];
    let h = |x: f64| {
        let s = real_moments(values, x);
        (t * s[1] - 1.0, 2.0 * t * s[2])
    };
    let hi = va - 1e-12 * (1.0 + va.abs());
    let lo = if anchor > 0 && values[anchor - 1] < va {
        // h is convex on (V_{a-1}, V_a); its minimiser solves h' = 0
        let left = values[anchor - 1];
        let (mut a, mut b) = (left + 1e-12 * (1.0 + left.abs()), hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if h(mid).1 < 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        let crit = 0.5 * (a + b);
        if h(crit).0 >= 0.0 {
            return Err(Error::NoBracket(format!(
                "t m_V' - 1 stays positive between {left} and {va}"
            )));
        }
        crit
    } else {
        let mut d = t.sqrt().max(1e-8);
        loop {
            let x = va - d;
            if h(x).0 < 0.0 {
                break x;
            }
            d *= 2.0;
            if d > 1e12 {
                return Err(Error::NoBracket("no sign change left of the spectrum".into()));
            }
        }
    };
    let xi = bracketed_root(|x| h(x), lo, hi)?;
    let s = real_moments(values, xi);
    Ok(EdgePoint { xi_minus: xi, e_minus: xi - t * s[0], anchor })
}

/// Safeguarded Newton for an increasing function with `f(lo) < 0 < f(hi)`.
fn bracketed_root<F: Fn(f64) -> (f64, f64)>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..400 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1e-300) || hi - lo <= 4.0 * f64::EPSILON * x.abs() {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence { iterations: 400, residual: f(x).0.abs() })
}

/// `R_3 = (1/N) sum (V_i - xi_-)^{-3}`.
pub fn edge_cube(values: &[f64], xi_minus: f64) -> f64 {
    real_moments(values, xi_minus)[2]
}

/// `gamma_0 = (t^3 R_3)^{-1/3}`.
pub fn gamma0(v: &InitialData, t: f64, edge: &EdgePoint) -> Result<f64> {
    gamma0_values(v.values(), t, edge.xi_minus)
}

pub(crate) fn gamma0_values(values: &[f64], t: f64, xi_minus: f64) -> Result<f64> {
    let r3 = edge_cube(values, xi_minus);
    if !(r3 > 0.0) {
        return Err(Error::NegativeCube(r3));
    }
    Ok((t.powi(3) * r3).powf(-1.0 / 3.0))
}
