//! Density recovery, the counting function and classical locations.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::edge::{find_edge, find_edge_at, gamma0_values, EdgePoint};
use super::solver::{solve_values, solve_values_near, SolverOptions, SpectralPoint};
use crate::error::{Error, Result};
use crate::measure::InitialData;
use crate::quad::integrate;

/// Height above the real axis at which boundary values are read.
pub fn eta_eval(e: f64) -> f64 {
    1e-9 * (1.0 + e.abs())
}

/// Boundary value of the fixed point at real `E` together with a gap flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPoint {
    pub point: SpectralPoint,
    /// `Im m` scales linearly in `eta`, i.e. `E` lies outside the support.
    pub in_gap: bool,
}

impl BoundaryPoint {
    pub fn density(&self) -> f64 {
        if self.in_gap {
            0.0
        } else {
            self.point.m.im / PI
        }
    }
}

pub(crate) fn boundary(values: &[f64], t: f64, e: f64, guess: Option<Complex64>) -> Result<BoundaryPoint> {
    let opts = SolverOptions::default();
    let eta = eta_eval(e);
    let z = Complex64::new(e, eta);
    let point = match guess {
        Some(m0) => solve_values_near(values, t, z, m0, &opts)?,
        None => solve_values(values, t, z, &opts)?,
    };
    let upper = solve_values_near(values, t, Complex64::new(e, 10.0 * eta), point.m, &opts)?;
    let in_gap = point.m.im < 0.5 * upper.m.im;
    Ok(BoundaryPoint { point, in_gap })
}

/// `rho_fc,t(E) = Im m_fc,t(E + i eta_eval) / pi`, exactly `0` in gaps.
pub fn density(v: &InitialData, t: f64, e: f64) -> Result<f64> {
    check_time(t)?;
    Ok(boundary(v.values(), t, e, None)?.density())
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("time t = {t} must be positive")))
    }
}

/// Closed-form primitive of `rho`: with `xi(E) = a + i b`,
/// `n(E) = (1/pi) [ (1/N) sum atan2(b, V_i - a) - (t/2) Im m^2 ]`.
pub(crate) fn counting_from_point(values: &[f64], t: f64, p: &SpectralPoint) -> f64 {
    let (a, b) = (p.xi.re, p.xi.im);
    let s: f64 = values.iter().map(|&v| b.atan2(v - a)).sum();
    (s / values.len() as f64 - 0.5 * t * (p.m * p.m).im) / PI
}

/// Distribution function `n(E) = int_{-inf}^E rho_fc,t`.
pub fn counting_function(v: &InitialData, t: f64, e: f64) -> Result<f64> {
    check_time(t)?;
    let b = boundary(v.values(), t, e, None)?;
    Ok(counting_from_point(v.values(), t, &b.point))
}

/// Cached analytic edge data for a pair `(V, t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeConvolutionProfile {
    pub t: f64,
    pub xi_minus: f64,
    pub e_minus: f64,
    pub gamma0: f64,
    /// 0-based anchor index (the spectral point right of the edge).
    pub anchor: usize,
    pub solver_tol: f64,
    /// Mass of the law below `E_-`.
    pub mass_below: f64,
}

impl FreeConvolutionProfile {
    pub fn compute(v: &InitialData, t: f64) -> Result<Self> {
        check_time(t)?;
        let edge = find_edge(v, t)?;
        Self::from_edge(v.values(), t, edge)
    }

    /// Profile anchored at an explicit index, for data without the `-1/2` convention.
    pub fn compute_at(values: &[f64], t: f64, anchor: usize) -> Result<Self> {
        check_time(t)?;
        let edge = find_edge_at(values, t, anchor)?;
        Self::from_edge(values, t, edge)
    }

    fn from_edge(values: &[f64], t: f64, edge: EdgePoint) -> Result<Self> {
        let gamma0 = gamma0_values(values, t, edge.xi_minus)?;
        // at the edge xi is real and equal to xi_-, and m = (xi_- - E_-)/t
        let m = Complex64::new((edge.xi_minus - edge.e_minus) / t, 0.0);
        let p = SpectralPoint { z: Complex64::new(edge.e_minus, 0.0), m, xi: Complex64::new(edge.xi_minus, 0.0), converged: true, iterations: 0 };
        let mass_below = counting_from_point(values, t, &p);
        Ok(Self {
            t,
            xi_minus: edge.xi_minus,
            e_minus: edge.e_minus,
            gamma0,
            anchor: edge.anchor,
            solver_tol: SolverOptions::default().tol,
            mass_below,
        })
    }

    pub fn edge(&self) -> EdgePoint {
        EdgePoint { xi_minus: self.xi_minus, e_minus: self.e_minus, anchor: self.anchor }
    }

    /// `m_fc,t(E_-)`, real at the edge.
    pub fn m_at_edge(&self) -> f64 {
        (self.xi_minus - self.e_minus) / self.t
    }

    /// Stability coefficients `R_k(xi_-)`, k = 1..=4 (all real at the edge).
    pub fn edge_coefficients(&self, v: &InitialData) -> [f64; 4] {
        let mut r = [0.0; 4];
        for &x in v.values() {
            let g = 1.0 / (x - self.xi_minus);
            let mut p = g;
            for rk in r.iter_mut() {
                *rk += p;
                p *= g;
            }
        }
        r.map(|x| x / v.len() as f64)
    }
}

/// Upper end of the support search window.
fn right_bound(values: &[f64], t: f64) -> f64 {
    values[values.len() - 1] + 2.0 * t.sqrt() + 1e-6
}

/// Classical locations: `gamma_i` solves `i/N = int_{E_-}^{gamma_i} rho` for
/// each (1-based) index, returned in the order given.
pub fn quantiles(v: &InitialData, t: f64, indices: &[usize]) -> Result<Vec<f64>> {
    let profile = FreeConvolutionProfile::compute(v, t)?;
    quantiles_with(v.values(), &profile, indices)
}

pub fn quantiles_with(values: &[f64], profile: &FreeConvolutionProfile, indices: &[usize]) -> Result<Vec<f64>> {
    quantiles_within(values, profile, indices, right_bound(values, profile.t))
}

/// As [`quantiles_with`], tabulating the counting function only up to `e_max`.
pub(crate) fn quantiles_within(
    values: &[f64],
    profile: &FreeConvolutionProfile,
    indices: &[usize],
    e_max: f64,
) -> Result<Vec<f64>> {
    let n = values.len();
    let t = profile.t;
    if let Some(&i) = indices.iter().find(|&&i| i == 0 || i > n) {
        return Err(Error::IndexOverflow(format!("quantile index {i} outside [1, {n}]")));
    }
    // tabulate n(E) on a grid refined near the edge, then solve each target
    let e0 = profile.e_minus;
    let grid = edge_grid(e0, e_max.max(e0 + 1e-9), 1200);
    let mut table: Vec<(f64, f64, Complex64)> = Vec::with_capacity(grid.len());
    let mut guess: Option<Complex64> = None;
    for &e in &grid {
        let b = boundary(values, t, e, guess)?;
        guess = Some(b.point.m);
        table.push((e, counting_from_point(values, t, &b.point) - profile.mass_below, b.point.m));
    }
    for w in table.windows(2) {
        if w[1].1 < w[0].1 - 1e-9 {
            return Err(Error::NonMonotoneCdf(format!("n({}) = {} < n({}) = {}", w[1].0, w[1].1, w[0].0, w[0].1)));
        }
    }
    let top = table[table.len() - 1].1;
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let target = i as f64 / n as f64;
        if target > top + 1e-9 {
            return Err(Error::QuadratureFailure(format!(
                "index {i} needs mass {target} above E_- but only {top} is available"
            )));
        }
        let k = table.partition_point(|r| r.1 < target).clamp(1, table.len() - 1);
        let (mut lo, mut hi) = (table[k - 1].0, table[k].0);
        let (mut f_lo, mut f_hi) = (table[k - 1].1, table[k].1);
        let mut m = table[k - 1].2;
        let mut x = lo + (hi - lo) * ((target - f_lo) / (f_hi - f_lo)).clamp(0.0, 1.0);
        if !x.is_finite() {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..100 {
            let b = boundary(values, t, x, Some(m))?;
            m = b.point.m;
            let f = counting_from_point(values, t, &b.point) - profile.mass_below - target;
            if f.abs() <= 1e-13 {
                break;
            }
            if f < 0.0 {
                lo = x;
                f_lo = f + target;
            } else {
                hi = x;
                f_hi = f + target;
            }
            let rho = b.density();
            let newton = x - f / rho;
            let secant = lo + (hi - lo) * ((target - f_lo) / (f_hi - f_lo));
            x = if rho > 0.0 && newton > lo && newton < hi {
                newton
            } else if secant > lo && secant < hi {
                0.5 * (secant + 0.5 * (lo + hi))
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        out.push(x);
    }
    Ok(out)
}

/// Grid on `[e0, e1]` with quadratic clustering at `e0`.
fn edge_grid(e0: f64, e1: f64, points: usize) -> Vec<f64> {
    (0..=points)
        .map(|k| {
            let s = k as f64 / points as f64;
            e0 + (e1 - e0) * s * s
        })
        .collect()
}

/// Sampled density `(E, rho)` with its support interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityTable {
    pub e: Vec<f64>,
    pub rho: Vec<f64>,
}

impl DensityTable {
    /// Samples `rho_fc,t` on `points + 1` energies from `E_-` up to the right end of the support.
    pub fn sample(v: &InitialData, profile: &FreeConvolutionProfile, points: usize) -> Result<Self> {
        Self::sample_between(v.values(), profile.t, profile.e_minus, right_bound(v.values(), profile.t), points)
    }

    /// Samples on `[e0, e1]` with quadratic clustering at `e0`.
    pub(crate) fn sample_between(values: &[f64], t: f64, e0: f64, e1: f64, points: usize) -> Result<Self> {
        let mut e = Vec::with_capacity(points + 1);
        let mut rho = Vec::with_capacity(points + 1);
        let mut guess = None;
        for x in edge_grid(e0, e1, points) {
            let b = boundary(values, t, x, guess)?;
            guess = Some(b.point.m);
            e.push(x);
            rho.push(b.density());
        }
        Ok(Self { e, rho })
    }

    /// CSV with columns `E, rho`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("E,rho\n");
        for (e, r) in self.e.iter().zip(&self.rho) {
            s.push_str(&format!("{e:.16e},{r:.16e}\n"));
        }
        s
    }
}

/// Total mass of `rho_fc,t` by adaptive quadrature over the detected support.
pub fn total_mass(v: &InitialData, t: f64, abs_tol: f64) -> Result<f64> {
    check_time(t)?;
    let values = v.values();
    let lo = values[0] - 2.0 * t.sqrt() - 1e-6;
    let hi = right_bound(values, t);
    // split at the support edges that lie inside the window so the
    // square-root endpoints sit on panel boundaries
    let mut cuts = vec![lo];
    if let Ok(p) = FreeConvolutionProfile::compute(v, t) {
        if p.e_minus > lo && p.e_minus < hi {
            cuts.push(p.e_minus);
        }
    }
    cuts.push(hi);
    let pieces = (cuts.len() - 1) as f64;
    let mut mass = 0.0;
    for w in cuts.windows(2) {
        mass += integrate(
            |x| boundary(values, t, x, None).map(|b| b.density()).map_err(|e| Error::QuadratureFailure(e.to_string())),
            w[0],
            w[1],
            abs_tol / pieces,
            4000,
        )?;
    }
    Ok(mass)
}
