//! The boundary contour `xi(E) = a + i b` right of the edge and the
//! criticality of `1 - t R_2` approaching the edge.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::density::{eta_eval, FreeConvolutionProfile};
use super::solver::{coefficients_at, solve_values, solve_values_near, SolverOptions};
use crate::error::Result;
use crate::measure::InitialData;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourPoint {
    pub e: f64,
    pub a: f64,
    pub b: f64,
    /// `b / (t sqrt(a - a_-))`
    pub b_ratio: f64,
    /// `|a - a_-| / |E - E_-|`
    pub a_ratio: f64,
}

/// Traces `xi(E)` at `E = E_- + kappa` for each `kappa > 0`.
pub fn trace_contour(v: &InitialData, profile: &FreeConvolutionProfile, kappas: &[f64]) -> Result<Vec<ContourPoint>> {
    let opts = SolverOptions::default();
    let t = profile.t;
    let mut guess: Option<Complex64> = None;
    let mut out = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let e = profile.e_minus + kappa;
        let z = Complex64::new(e, eta_eval(e));
        let p = match guess {
            Some(m0) => solve_values_near(v.values(), t, z, m0, &opts)?,
            None => solve_values(v.values(), t, z, &opts)?,
        };
        guess = Some(p.m);
        let (a, b) = (p.xi.re, p.xi.im);
        let da = a - profile.xi_minus;
        out.push(ContourPoint {
            e,
            a,
            b,
            b_ratio: b / (t * da.abs().sqrt()),
            a_ratio: da.abs() / kappa,
        });
    }
    Ok(out)
}

/// `|1 - t R_2|` at `E_- + i eta` for each `eta`.
pub fn edge_criticality(v: &InitialData, profile: &FreeConvolutionProfile, etas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let opts = SolverOptions::default();
    etas.iter()
        .map(|&eta| {
            let p = solve_values(v.values(), profile.t, Complex64::new(profile.e_minus, eta), &opts)?;
            let c = coefficients_at(v.values(), p, 10.0 * opts.tol)?;
            Ok((eta, (1.0 - profile.t * c.get(2)).norm()))
        })
        .collect()
}

/// Smallest `K` with every value of `ratios` in `[1/K, K]`.
pub fn bracket_constant(ratios: impl IntoIterator<Item = f64>) -> f64 {
    ratios
        .into_iter()
        .map(|r| if r > 0.0 { r.max(1.0 / r) } else { f64::INFINITY })
        .fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn semicircle_contour() {
        // V = 0: xi = z + t m lies on the circle |xi| = sqrt(t)
        let v = InitialData::point_mass(1, 0.0);
        let p = FreeConvolutionProfile::compute(&v, 1.0).unwrap();
        let pts = trace_contour(&v, &p, &[1e-4, 1e-2, 0.5, 2.0]).unwrap();
        for c in &pts {
            assert!(((c.a * c.a + c.b * c.b).sqrt() - 1.0).abs() < 1e-6);
        }
        // near the edge b ~ t sqrt(2(a - a_-)) and a - a_- ~ (E - E_-)/2
        assert!((pts[0].b_ratio - 2f64.sqrt()).abs() < 1e-2);
        assert!((pts[0].a_ratio - 0.5).abs() < 1e-2);
    }

    #[test]
    fn criticality_vanishes_like_sqrt_eta() {
        let v = InitialData::point_mass(1, 0.0);
        let p = FreeConvolutionProfile::compute(&v, 1.0).unwrap();
        let r = edge_criticality(&v, &p, &[1e-8, 1e-6, 1e-4]).unwrap();
        for w in r.windows(2) {
            let slope = (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln();
            assert!((slope - 0.5).abs() < 0.02, "slope {slope}");
        }
    }

    #[test]
    fn bracket_constant_is_symmetric() {
        assert_eq!(bracket_constant([0.5, 2.0, 1.0]), 2.0);
        assert_eq!(bracket_constant([0.25]), 4.0);
    }
}
