//! Comparison of the free convolutions of two measures that agree near their
//! lower edge.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{eta_eval, FreeConvolutionProfile};
use super::solver::{solve_values, solve_values_near, SolverOptions};
use crate::error::Result;
use crate::measure::InitialData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingRow {
    pub x: f64,
    pub rho1: f64,
    pub rho2: f64,
    /// `|rho_1(x + E_1) / rho_2(x + E_2) - 1|`
    pub rel_density: f64,
    /// `|Re[m_1(x + E_1) - m_1(E_1)] - Re[m_2(x + E_2) - m_2(E_2)]|`
    pub re_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub t: f64,
    pub t0: f64,
    pub n: usize,
    pub rows: Vec<MatchingRow>,
    pub edge_gap: f64,
    pub max_rel_density: f64,
    /// `max_rel_density / (t / t0)`
    pub density_constant: f64,
    /// `edge_gap / (t^3 + t N^{-1/2})`
    pub edge_constant: f64,
    /// `max re_m / (x / t0)` over `x > 0`
    pub re_m_constant: f64,
    pub envelope_constant: f64,
    pub within_envelope: bool,
}

fn boundary_values(values: &[f64], t: f64, e0: f64, xs: &[f64]) -> Result<Vec<Complex64>> {
    let opts = SolverOptions::default();
    let mut guess: Option<Complex64> = None;
    xs.iter()
        .map(|&x| {
            let e = e0 + x;
            let z = Complex64::new(e, eta_eval(e));
            let p = match guess {
                Some(m0) => solve_values_near(values, t, z, m0, &opts)?,
                None => solve_values(values, t, z, &opts)?,
            };
            guess = Some(p.m);
            Ok(p.m)
        })
        .collect()
}

/// Evaluates both laws at `x + E_{-,k}` for every `x >= 0` of `x_grid` and
/// judges the deviations against `envelope_constant` times their envelopes.
pub fn matching_compare(
    v1: &InitialData,
    v2: &InitialData,
    t: f64,
    t0: f64,
    x_grid: &[f64],
    envelope_constant: f64,
) -> Result<MatchingReport> {
    let p1 = FreeConvolutionProfile::compute(v1, t)?;
    let p2 = FreeConvolutionProfile::compute(v2, t)?;
    let m1 = boundary_values(v1.values(), t, p1.e_minus, x_grid)?;
    let m2 = boundary_values(v2.values(), t, p2.e_minus, x_grid)?;
    let (r1, r2) = (p1.m_at_edge(), p2.m_at_edge());
    let rows: Vec<MatchingRow> = x_grid
        .iter()
        .zip(m1.iter().zip(&m2))
        .map(|(&x, (a, b))| {
            let (rho1, rho2) = (a.im / std::f64::consts::PI, b.im / std::f64::consts::PI);
            let rel_density = if rho2 > 0.0 { (rho1 / rho2 - 1.0).abs() } else if rho1 > 0.0 { f64::INFINITY } else { 0.0 };
            MatchingRow { x, rho1, rho2, rel_density, re_m: ((a.re - r1) - (b.re - r2)).abs() }
        })
        .collect();
    let n = v1.len();
    let edge_gap = (p1.e_minus - p2.e_minus).abs();
    let max_rel_density = rows.iter().map(|r| r.rel_density).fold(0.0, f64::max);
    let density_constant = max_rel_density / (t / t0);
    let edge_constant = edge_gap / (t.powi(3) + t / (n as f64).sqrt());
    let re_m_constant = rows
        .iter()
        .filter(|r| r.x > 0.0)
        .map(|r| r.re_m / (r.x / t0))
        .fold(0.0, f64::max);
    let within_envelope = density_constant <= envelope_constant
        && edge_constant <= envelope_constant
        && re_m_constant <= envelope_constant;
    Ok(MatchingReport {
        t,
        t0,
        n,
        rows,
        edge_gap,
        max_rel_density,
        density_constant,
        edge_constant,
        re_m_constant,
        envelope_constant,
        within_envelope,
    })
}
