//! Empirical local-law envelopes: `|m_N - m_fc,t|` over a spectral grid on
//! both sides of the edge, normalised by the expected error size.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::empirical_quantile;
use crate::error::{Error, Result};
use crate::free_conv::{find_edge, solve_mfc, solve_mfc_near};
use crate::measure::{stieltjes_transform, InitialData};

/// Grid over the two spectral domains. Right of the edge
/// (`E_- <= E <= E_- + right_extent`) the grid starts at the smallest `eta`
/// with `eta sqrt(kappa + eta) >= N^{sigma - 1}`; left of it
/// (`E_- - left_extent <= E <= E_-`) at `eta = N^{sigma - 2/3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalLawGrid {
    pub sigma: f64,
    pub right_extent: f64,
    pub left_extent: f64,
    pub eta_max: f64,
    pub e_points: usize,
    pub eta_points: usize,
    /// Offset added to `E_-` when forming `kappa` in the envelopes.
    pub edge_shift: f64,
}

impl Default for LocalLawGrid {
    fn default() -> Self {
        Self { sigma: 0.1, right_extent: 1.0, left_extent: 1.0, eta_max: 1.0, e_points: 25, eta_points: 10, edge_shift: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawSide {
    /// Grid points `(E, eta)`.
    pub points: Vec<(f64, f64)>,
    pub envelopes: Vec<f64>,
    /// Per trial: `sup_grid |m_N - m_fc,t| / envelope`.
    pub per_trial_sup: Vec<f64>,
    pub quantile: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawReport {
    pub n: usize,
    pub t: f64,
    pub e_minus: f64,
    pub grid: LocalLawGrid,
    pub quantile_level: f64,
    /// `E >= E_-`, envelope `1/(N eta)`.
    pub right: LocalLawSide,
    /// `E <= E_-`, envelope `1/(N (kappa + eta)) + 1/((N eta)^2 sqrt(kappa + eta))`.
    pub left: LocalLawSide,
}

/// `(1/N) sum 1/(lambda_i - z)`.
pub fn empirical_stieltjes(spectrum: &[f64], z: Complex64) -> Complex64 {
    let s: Complex64 = spectrum.iter().map(|&x| 1.0 / (Complex64::new(x, 0.0) - z)).sum();
    s / spectrum.len() as f64
}

/// Smallest `eta` with `eta sqrt(kappa + eta) >= c`.
fn eta_floor(kappa: f64, c: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, c.max(c.powf(2.0 / 3.0)) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * (kappa + mid).sqrt() >= c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points <= 1 || hi <= lo {
        return vec![lo];
    }
    (0..points).map(|q| lo * (hi / lo).powf(q as f64 / (points - 1) as f64)).collect()
}

impl LocalLawGrid {
    fn validate(&self) -> Result<()> {
        let ok = self.sigma > 0.0 && self.right_extent >= 0.0 && self.left_extent >= 0.0 && self.eta_max > 0.0 && self.e_points >= 1 && self.eta_points >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid local-law grid {self:?}")))
        }
    }

    /// Grid points of the right and left domains.
    pub fn points(&self, n: usize, e_minus: f64) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
        let nf = n as f64;
        let frac = |q: usize| if self.e_points == 1 { 0.0 } else { (q as f64 / (self.e_points - 1) as f64).powi(2) };
        let mut right = Vec::new();
        let mut left = Vec::new();
        let left_floor = nf.powf(self.sigma - 2.0 / 3.0);
        for q in 0..self.e_points {
            let kappa = self.right_extent * frac(q);
            let floor = eta_floor(kappa, nf.powf(self.sigma - 1.0));
            right.extend(log_grid(floor, self.eta_max.max(floor), self.eta_points).into_iter().map(|eta| (e_minus + kappa, eta)));
            let kappa = self.left_extent * frac(q);
            left.extend(log_grid(left_floor, self.eta_max.max(left_floor), self.eta_points).into_iter().map(|eta| (e_minus - kappa, eta)));
        }
        (right, left)
    }
}

/// Limit transform `m_fc,t` at each point; `t = 0` gives `m_V` itself.
fn limit_transforms(v: &InitialData, t: f64, points: &[(f64, f64)]) -> Result<Vec<Complex64>> {
    let mut out = Vec::with_capacity(points.len());
    let mut prev: Option<Complex64> = None;
    for &(e, eta) in points {
        let z = Complex64::new(e, eta);
        let m = if t == 0.0 {
            stieltjes_transform(v, z, 0)?
        } else {
            match prev {
                Some(m0) => solve_mfc_near(v, t, z, m0)?.m,
                None => solve_mfc(v, t, z)?.m,
            }
        };
        prev = Some(m);
        out.push(m);
    }
    Ok(out)
}

fn side(spectra: &[Vec<f64>], points: Vec<(f64, f64)>, envelopes: Vec<f64>, limit: &[Complex64], level: f64) -> LocalLawSide {
    let per_trial_sup: Vec<f64> = spectra
        .iter()
        .map(|s| {
            points
                .iter()
                .zip(&envelopes)
                .zip(limit)
                .map(|((&(e, eta), env), m)| (empirical_stieltjes(s, Complex64::new(e, eta)) - m).norm() / env)
                .fold(0.0, f64::max)
        })
        .collect();
    let quantile = empirical_quantile(&per_trial_sup, level);
    LocalLawSide { points, envelopes, per_trial_sup, quantile }
}

/// Sup-ratios of `|m_N - m_fc,t|` to the envelopes for each sampled spectrum
/// of `V + sqrt(t) G`, and their `quantile_level` quantile across trials. At
/// `t = 0` the edge is taken at `min V`.
pub fn local_law_report(v: &InitialData, t: f64, spectra: &[Vec<f64>], grid: &LocalLawGrid, quantile_level: f64) -> Result<LocalLawReport> {
    grid.validate()?;
    if spectra.is_empty() {
        return Err(Error::ShapeMismatch("no spectra".into()));
    }
    if let Some(s) = spectra.iter().find(|s| s.len() != v.len()) {
        return Err(Error::ShapeMismatch(format!("spectrum of length {} for N = {}", s.len(), v.len())));
    }
    let n = v.len();
    let nf = n as f64;
    let e_minus = if t == 0.0 { v.min() } else { find_edge(v, t)?.e_minus };
    let (right_pts, left_pts) = grid.points(n, e_minus);
    let centre = e_minus + grid.edge_shift;
    let right_env: Vec<f64> = right_pts.iter().map(|&(_, eta)| 1.0 / (nf * eta)).collect();
    let left_env: Vec<f64> = left_pts
        .iter()
        .map(|&(e, eta)| {
            let a = (e - centre).abs() + eta;
            1.0 / (nf * a) + 1.0 / ((nf * eta).powi(2) * a.sqrt())
        })
        .collect();
    let right_m = limit_transforms(v, t, &right_pts)?;
    let left_m = limit_transforms(v, t, &left_pts)?;
    Ok(LocalLawReport {
        n,
        t,
        e_minus,
        grid: *grid,
        quantile_level,
        right: side(spectra, right_pts, right_env, &right_m, quantile_level),
        left: side(spectra, left_pts, left_env, &left_m, quantile_level),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{quantile_initial_data, DensitySpec};

    #[test]
    fn eta_floor_solves_the_domain_boundary() {
        for &(kappa, c) in &[(0.0, 1e-3), (0.3, 1e-3), (2.0, 0.5)] {
            let eta = eta_floor(kappa, c);
            assert!((eta * (kappa + eta).sqrt() - c).abs() < 1e-12 * c.max(1.0));
        }
    }

    #[test]
    fn grid_respects_both_domains() {
        let grid = LocalLawGrid { e_points: 6, eta_points: 4, ..Default::default() };
        let n = 500;
        let (right, left) = grid.points(n, -2.0);
        assert_eq!(right.len(), 24);
        assert_eq!(left.len(), 24);
        let nf = n as f64;
        for &(e, eta) in &right {
            assert!(e >= -2.0);
            assert!((e + 2.0 + eta).sqrt() * nf * eta >= nf.powf(0.1) * (1.0 - 1e-9));
        }
        for &(e, eta) in &left {
            assert!(e <= -2.0 && eta >= nf.powf(0.1 - 2.0 / 3.0) * (1.0 - 1e-12));
        }
    }

    #[test]
    fn noiseless_spectrum_at_time_zero_has_zero_deviation() {
        let v = quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, 200).unwrap();
        let grid = LocalLawGrid { e_points: 4, eta_points: 3, ..Default::default() };
        let r = local_law_report(&v, 0.0, &[v.values().to_vec()], &grid, 0.95).unwrap();
        assert!(r.right.per_trial_sup[0] < 1e-9 && r.left.per_trial_sup[0] < 1e-9);
    }

    #[test]
    fn shape_is_checked() {
        let v = InitialData::point_mass(10, 0.0);
        assert!(local_law_report(&v, 1.0, &[vec![0.0; 9]], &LocalLawGrid::default(), 0.95).is_err());
        assert!(local_law_report(&v, 1.0, &[], &LocalLawGrid::default(), 0.95).is_err());
    }
}
