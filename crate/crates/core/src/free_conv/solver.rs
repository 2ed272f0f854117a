//! Fixed-point solver for `m = m_V(z + t m)` on the Herglotz branch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure::{resolvent_pair, resolvent_powers, stieltjes_transform, InitialData};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Residual target `|m - m_V(xi)| <= tol * max(1, |m|)`.
    pub tol: f64,
    pub max_newton: usize,
    /// Continuation starts at `Im z = max(eta_start, 10 t)`.
    pub eta_start: f64,
    /// Geometric ratio of successive `eta` values.
    pub ratio: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_newton: 40, eta_start: 10.0, ratio: 0.7 }
    }
}

/// Solution of the fixed-point equation at one spectral parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPoint {
    pub z: Complex64,
    pub m: Complex64,
    pub xi: Complex64,
    pub converged: bool,
    pub iterations: usize,
}

impl SpectralPoint {
    pub fn residual(&self, v: &InitialData) -> f64 {
        (self.m - resolvent_pair(v.values(), self.xi).0).norm()
    }
}

enum Attempt {
    Ok { m: Complex64, iterations: usize },
    Failed { residual: f64, iterations: usize },
}

/// Newton iteration for `g(m) = m - m_V(z + t m)` from `m0`.
///
/// The accepted root must satisfy `Im m > 0` and `1 - t (1/N) sum |V_i - xi|^{-2} > 0`;
/// for `Im z > 0` exactly one root does, so any accepted root is the Herglotz one.
fn newton(values: &[f64], t: f64, z: Complex64, m0: Complex64, opts: &SolverOptions) -> Attempt {
    let mut m = m0;
    let mut residual = f64::INFINITY;
    for it in 1..=opts.max_newton {
        let xi = z + t * m;
        let (mv, dmv) = resolvent_pair(values, xi);
        let g = m - mv;
        residual = g.norm();
        if !residual.is_finite() {
            break;
        }
        let jac = Complex64::new(1.0, 0.0) - t * dmv;
        let mut step = g / jac;
        if !step.re.is_finite() || !step.im.is_finite() {
            break;
        }
        // keep the iterate in the upper half-plane
        let mut damp = 1.0;
        while (m - damp * step).im <= 0.0 && damp > 1e-6 {
            damp *= 0.5;
        }
        step *= damp;
        m -= step;
        if residual <= opts.tol * m.norm().max(1.0) || step.norm() <= 1e-15 * m.norm().max(1e-300) {
            let xi = z + t * m;
            let (mv, _) = resolvent_pair(values, xi);
            residual = (m - mv).norm();
            if residual <= opts.tol * m.norm().max(1.0) && branch_ok(values, t, m, xi) {
                return Attempt::Ok { m, iterations: it };
            }
            if residual <= opts.tol * m.norm().max(1.0) {
                break;
            }
        }
    }
    Attempt::Failed { residual, iterations: opts.max_newton }
}

fn branch_ok(values: &[f64], t: f64, m: Complex64, xi: Complex64) -> bool {
    if m.im <= 0.0 {
        return false;
    }
    let n = values.len() as f64;
    let mut s = 0.0;
    for &v in values {
        s += (Complex64::new(v, 0.0) - xi).norm_sqr().recip();
    }
    1.0 - t * s / n > 0.0
}

/// Damped Picard iteration, valid when `t |m_V'| < 1` (large `eta`).
fn picard(values: &[f64], t: f64, z: Complex64, opts: &SolverOptions) -> Complex64 {
    let mut m = -z.inv();
    for _ in 0..200 {
        let next = resolvent_pair(values, z + t * m).0;
        let d = (next - m).norm();
        m = 0.5 * (m + next);
        if d < 1e-14 {
            break;
        }
    }
    match newton(values, t, z, m, opts) {
        Attempt::Ok { m, .. } => m,
        Attempt::Failed { .. } => m,
    }
}

fn validate(t: f64, z: Complex64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("time t = {t} must be positive")));
    }
    if !(z.im > 0.0 && z.is_finite()) {
        return Err(Error::Config(format!("spectral parameter {z} must lie in the upper half-plane")));
    }
    Ok(())
}

pub fn solve_mfc(v: &InitialData, t: f64, z: Complex64) -> Result<SpectralPoint> {
    solve_mfc_with(v, t, z, &SolverOptions::default())
}

/// Solves by `eta`-continuation from the asymptotic regime down to `Im z`.
pub fn solve_mfc_with(v: &InitialData, t: f64, z: Complex64, opts: &SolverOptions) -> Result<SpectralPoint> {
    validate(t, z)?;
    solve_values(v.values(), t, z, opts)
}

pub(crate) fn solve_values(values: &[f64], t: f64, z: Complex64, opts: &SolverOptions) -> Result<SpectralPoint> {
    let e = z.re;
    let target = z.im;
    let mut eta = opts.eta_start.max(10.0 * t).max(target);
    let mut m = picard(values, t, Complex64::new(e, eta), opts);
    let mut total = 0usize;
    if eta == target {
        return finish(values, t, z, m, opts, total);
    }
    // log-step in eta; halved on failure, regrown on success
    let full = opts.ratio.ln();
    let mut step = full;
    while eta > target {
        let next = (eta * step.exp()).max(target);
        match newton(values, t, Complex64::new(e, next), m, opts) {
            Attempt::Ok { m: m_new, iterations } => {
                total += iterations;
                m = m_new;
                eta = next;
                step = (2.0 * step).max(full);
            }
            Attempt::Failed { .. } => {
                step *= 0.5;
                if step.abs() < 1e-10 {
                    return Err(Error::StepCollapse { eta });
                }
            }
        }
    }
    finish(values, t, z, m, opts, total)
}

fn finish(values: &[f64], t: f64, z: Complex64, m: Complex64, opts: &SolverOptions, total: usize) -> Result<SpectralPoint> {
    match newton(values, t, z, m, opts) {
        Attempt::Ok { m, iterations } => Ok(SpectralPoint { z, m, xi: z + t * m, converged: true, iterations: total + iterations }),
        Attempt::Failed { residual, iterations } => Err(Error::NoConvergence { iterations: total + iterations, residual }),
    }
}

/// Newton from a nearby solution `m0`, falling back to full continuation.
pub fn solve_mfc_near(v: &InitialData, t: f64, z: Complex64, m0: Complex64) -> Result<SpectralPoint> {
    validate(t, z)?;
    solve_values_near(v.values(), t, z, m0, &SolverOptions::default())
}

pub(crate) fn solve_values_near(
    values: &[f64],
    t: f64,
    z: Complex64,
    m0: Complex64,
    opts: &SolverOptions,
) -> Result<SpectralPoint> {
    let start = if m0.im > 0.0 { m0 } else { Complex64::new(m0.re, z.im.max(1e-300)) };
    match newton(values, t, z, start, opts) {
        Attempt::Ok { m, iterations } => Ok(SpectralPoint { z, m, xi: z + t * m, converged: true, iterations }),
        Attempt::Failed { .. } => solve_values(values, t, z, opts),
    }
}

/// `F(xi) = xi - t m_V(xi)` and its derivatives
/// `F^{(k)} = delta_{k1} - t k! (1/N) sum (V_i - xi)^{-(k+1)}`.
pub fn f_map(v: &InitialData, t: f64, xi: Complex64, order: u32) -> Result<Complex64> {
    let d = stieltjes_transform(v, xi, order)?;
    Ok(match order {
        0 => xi - t * d,
        1 => 1.0 - t * d,
        _ => -t * d,
    })
}

/// `R_k = (1/N) sum g_i^k`, `g_i = 1/(V_i - xi)`, for `k = 1..=4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityCoefficients {
    pub point: SpectralPoint,
    pub r: [Complex64; 4],
}

impl StabilityCoefficients {
    pub fn get(&self, k: usize) -> Complex64 {
        self.r[k - 1]
    }
}

pub(crate) fn coefficients_at(values: &[f64], point: SpectralPoint, tol: f64) -> Result<StabilityCoefficients> {
    let r = resolvent_powers::<4>(values, point.xi);
    let residual = (r[0] - point.m).norm();
    if residual > tol * point.m.norm().max(1.0) {
        return Err(Error::NoConvergence { iterations: point.iterations, residual });
    }
    Ok(StabilityCoefficients { point, r })
}

/// Stability coefficients at `z` in the upper half-plane.
pub fn stability_coefficients(v: &InitialData, t: f64, z: Complex64) -> Result<StabilityCoefficients> {
    let opts = SolverOptions::default();
    let point = solve_mfc_with(v, t, z, &opts)?;
    coefficients_at(v.values(), point, 10.0 * opts.tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{quantile_initial_data, DensitySpec};

    fn semicircle_m(t: f64, z: Complex64) -> Complex64 {
        // root of t m^2 + z m + 1 = 0 with Im m > 0
        let disc = (z * z - 4.0 * t).sqrt();
        let r1 = (-z + disc) / (2.0 * t);
        let r2 = (-z - disc) / (2.0 * t);
        if r1.im > 0.0 {
            r1
        } else {
            r2
        }
    }

    #[test]
    fn semicircle_center() {
        let v = InitialData::point_mass(1, 0.0);
        let p = solve_mfc(&v, 1.0, Complex64::new(0.0, 1.0)).unwrap();
        let golden = (5f64.sqrt() - 1.0) / 2.0;
        assert!((p.m - Complex64::new(0.0, golden)).norm() < 1e-12);
        assert!(p.converged);
    }

    #[test]
    fn semicircle_large_z() {
        let v = InitialData::point_mass(3, 0.0);
        let z = Complex64::new(0.0, 10.0);
        let p = solve_mfc(&v, 1.0, z).unwrap();
        assert!((p.m * z + 1.0).norm() <= 0.011);
    }

    #[test]
    fn semicircle_grid_matches_quadratic() {
        let v = InitialData::point_mass(2, 0.0);
        for &t in &[0.25f64, 1.0, 3.0] {
            for &e in &[-3.0, -2.0 * t.sqrt(), -1.0, 0.0, 0.7, 2.5] {
                for &eta in &[1e-8, 1e-3, 0.5, 20.0] {
                    let z = Complex64::new(e, eta);
                    let p = solve_mfc(&v, t, z).unwrap();
                    let m = semicircle_m(t, z);
                    assert!((p.m - m).norm() < 1e-7 * m.norm().max(1.0), "t={t} z={z}: {} vs {m}", p.m);
                    assert!(p.m.norm() <= t.powf(-0.5) * (1.0 + 1e-9));
                }
            }
        }
    }

    #[test]
    fn f_map_point_mass() {
        let v = InitialData::point_mass(1, 0.0);
        let xi = Complex64::new(-1.0, 0.0);
        assert!((f_map(&v, 1.0, xi, 0).unwrap() - (-2.0)).norm() < 1e-15);
        assert!(f_map(&v, 1.0, xi, 1).unwrap().norm() < 1e-15);
        assert!((f_map(&v, 1.0, xi, 2).unwrap() - (-2.0)).norm() < 1e-15);
    }

    #[test]
    fn coefficients_decay_at_large_eta() {
        let v = InitialData::point_mass(1, 0.0);
        let c = stability_coefficients(&v, 1.0, Complex64::new(0.0, 10.0)).unwrap();
        assert!(c.get(2).norm() <= 0.011);
        assert!((c.get(1) - c.point.m).norm() < 1e-12);
    }

    #[test]
    fn herglotz_on_regular_data() {
        let v = quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, 300).unwrap();
        for &e in &[-0.5, -0.1, 0.0, 0.3, 0.9, 1.4] {
            for &eta in &[1e-9, 1e-4, 0.1] {
                let p = solve_mfc(&v, 0.1, Complex64::new(e, eta)).unwrap();
                assert!(p.m.im > 0.0);
                assert!(p.residual(&v) < 1e-10);
                assert!(p.m.norm() <= 0.1f64.powf(-0.5));
            }
        }
    }

    #[test]
    fn warm_start_agrees_with_continuation() {
        let v = quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, 200).unwrap();
        let a = solve_mfc(&v, 0.1, Complex64::new(0.2, 1e-9)).unwrap();
        let b = solve_mfc_near(&v, 0.1, Complex64::new(0.21, 1e-9), a.m).unwrap();
        let c = solve_mfc(&v, 0.1, Complex64::new(0.21, 1e-9)).unwrap();
        assert!((b.m - c.m).norm() < 1e-9);
    }
}
