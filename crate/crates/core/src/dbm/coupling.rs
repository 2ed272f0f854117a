//! Coupled edge dynamics: the DBM `lambda` started from `gamma_0 H_{t_0}` and a
//! GOE-started DBM `mu` driven by the same Brownian motions (`lambda_{i_0}`
//! and `mu_1` share a label), and the reference generator path of the
//! GOE-side system in shifted coordinates.

use serde::{Deserialize, Serialize};

use super::ensemble::{ensemble_eigenvalues, matrix_path_eigenvalues, sample_gaussian_ensemble, Beta};
use super::generator::ParticlePath;
use super::ledger::NoiseLedger;
use super::particles::{integrate_blocks, sentinel, Block, Coulomb, StepStats};
use super::profile::{semicircle_table, InitialLaw, ProfileSeries};
use super::topology::ShortRangeTopology;
use crate::error::{Error, Result};
use crate::free_conv::{find_edge, gamma0};
use crate::measure::InitialData;
use crate::rng::{derive_stream, Role};

/// Edge data of the `lambda` system: `gamma_0` from time `t_0` and
/// `E_lambda(t) = gamma_0 E_-(t_0 + t / gamma_0^2)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaEdge {
    pub t0: f64,
    pub gamma0: f64,
    /// 1-based index of the first `V_i >= -1/2`.
    pub i0: usize,
}

impl LambdaEdge {
    pub fn new(v: &InitialData, t0: f64) -> Result<Self> {
        let edge = find_edge(v, t0)?;
        let g = gamma0(v, t0, &edge)?;
        let i0 = v.anchor_index().ok_or_else(|| Error::IndexOverflow("no V_i >= -1/2".into()))? + 1;
        Ok(Self { t0, gamma0: g, i0 })
    }

    pub fn e_lambda(&self, v: &InitialData, t: f64) -> Result<f64> {
        Ok(self.gamma0 * find_edge(v, self.t0 + t / (self.gamma0 * self.gamma0))?.e_minus)
    }
}

/// `E_mu(t) = -2 sqrt(1 + t)`.
pub fn e_mu(t: f64) -> f64 {
    -2.0 * (1.0 + t).sqrt()
}

/// Differences `(lambda_{i_0+i-1}(t) - E_lambda(t)) - (mu_i(t) - E_mu(t))`
/// for `i = 1..=k` at each recorded time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingTrace {
    pub times: Vec<f64>,
    pub differences: Vec<Vec<f64>>,
    pub stats: StepStats,
}

/// One coupled trial. `record_steps` are base-step counts (of size `dt`) at
/// which differences are taken, and `e_lambda[q]` is `E_lambda` at
/// `record_steps[q] * dt`.
#[allow(clippy::too_many_arguments)]
pub fn coupled_edge_run(
    v: &InitialData,
    edge: &LambdaEdge,
    e_lambda: &[f64],
    record_steps: &[u64],
    dt: f64,
    k: usize,
    master_seed: u64,
    trial: u64,
) -> Result<CouplingTrace> {
    let n = v.len();
    if e_lambda.len() != record_steps.len() || record_steps.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("record steps must increase and match the edge table".into()));
    }
    if edge.i0 + k > n + 1 || k == 0 {
        return Err(Error::IndexOverflow(format!("i_0 + k - 1 = {} exceeds N = {n}", edge.i0 + k - 1)));
    }
    let h = ensemble_eigenvalues(v, edge.t0, &derive_stream(master_seed, trial, Role::Matrix))?;
    let lambda: Vec<f64> = h.iter().map(|x| edge.gamma0 * x).collect();
    let mu = sample_gaussian_ensemble(n, Beta::One, &derive_stream(master_seed, trial, Role::Initial)).eigenvalues()?;
    let mut blocks = vec![
        Block { positions: lambda, label_offset: 2 - edge.i0 as i64 },
        Block { positions: mu, label_offset: 1 },
    ];
    let mut ledger = NoiseLedger::new(derive_stream(master_seed, trial, Role::Brownian), dt)?;
    let i0 = edge.i0;
    let diff = |b: &[Block], t: f64, el: f64| -> Vec<f64> {
        (1..=k).map(|i| (b[0].positions[i0 + i - 2] - el) - (b[1].positions[i - 1] - e_mu(t))).collect()
    };
    let mut times = Vec::with_capacity(record_steps.len());
    let mut differences = Vec::with_capacity(record_steps.len());
    let mut q = 0;
    if record_steps.first() == Some(&0) {
        times.push(0.0);
        differences.push(diff(&blocks, 0.0, e_lambda[0]));
        q = 1;
    }
    let total = record_steps.last().copied().unwrap_or(0);
    let mut field = Coulomb { normalization: n as f64, shift: 0.0 };
    let stats = integrate_blocks(&mut blocks, &mut field, 0.0, total, n as f64, &mut ledger, |step, t, b| {
        if q < record_steps.len() && record_steps[q] == step {
            times.push(t);
            differences.push(diff(b, t, e_lambda[q]));
            q += 1;
        }
    })?;
    Ok(CouplingTrace { times, differences, stats })
}

/// Options for the reference generator path.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReferencePathOptions {
    pub c_v: f64,
    /// Equal-weight atoms per particle in the discretised initial law.
    pub atoms_per_particle: usize,
    /// Density samples per profile snapshot.
    pub density_points: usize,
    /// Number of profile snapshots over the path (at least 2).
    pub profile_snapshots: usize,
}

impl Default for ReferencePathOptions {
    fn default() -> Self {
        Self { c_v: 1.0, atoms_per_particle: 2, density_points: 400, profile_snapshots: 5 }
    }
}

/// Generator path of the GOE-side system `y` (the `alpha = 0` interpolation)
/// at `times`, with positions `y(t) - E_-(t, 0)`.
///
/// The core follows the exact matrix route `y(t) = eig(W(1 + t))` for a
/// matrix Brownian motion `W`. The sentinels `y_i`, `i <= 0`, stay at their
/// initial positions: they sit `N` apart and form their own block of `A`.
pub fn reference_generator_path(
    topology: &ShortRangeTopology,
    times: &[f64],
    opts: &ReferencePathOptions,
    master_seed: u64,
    trial: u64,
) -> Result<ParticlePath> {
    let n = topology.n;
    if times.is_empty() || times[0] != 0.0 || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("path times must start at 0 and increase".into()));
    }
    let shifted: Vec<f64> = times.iter().map(|t| 1.0 + t).collect();
    let spectra = matrix_path_eigenvalues(&InitialData::point_mass(n, 0.0), &shifted, &derive_stream(master_seed, trial, Role::Increment))?;
    let pad: Vec<f64> = (-(n as i64)..=0).map(|i| sentinel(i, n, opts.c_v, true)).collect();
    let window = |core: &[f64]| -> Vec<f64> {
        let mut z = pad.clone();
        z.extend_from_slice(core);
        z
    };
    let y0 = window(&spectra[0]);
    let rho = semicircle_table(1.0, 4 * opts.density_points);
    let law = InitialLaw::build(&rho, &rho, 0.0, &y0, n, n)?;
    let t_end = *times.last().expect("non-empty");
    let count = opts.profile_snapshots.max(2);
    let profile_times: Vec<f64> = (0..count).map(|q| t_end * q as f64 / (count - 1) as f64).collect();
    let q_max = (topology.quantile_reach() as usize + 1).min(n - 1);
    let profile = ProfileSeries::compute(&law, &profile_times, q_max, opts.atoms_per_particle, opts.density_points)?;
    let positions = times
        .iter()
        .zip(&spectra)
        .map(|(&t, core)| {
            let e = profile.e_minus(t);
            window(core).into_iter().map(|x| x - e).collect()
        })
        .collect();
    Ok(ParticlePath {
        times: times.to_vec(),
        positions,
        normalization: n as f64,
        topology: topology.clone(),
        profile_zero: profile.clone(),
        profile,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{quantile_initial_data, DensitySpec};

    #[test]
    fn goe_edge_is_the_semicircle_edge() {
        assert_eq!(e_mu(0.0), -2.0);
        assert!((e_mu(3.0) + 4.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_edge_scales_with_gamma0() {
        let v = quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, 200).unwrap();
        let e = LambdaEdge::new(&v, 0.3).unwrap();
        assert_eq!(e.i0, 1);
        let direct = e.gamma0 * find_edge(&v, 0.3).unwrap().e_minus;
        assert!((e.e_lambda(&v, 0.0).unwrap() - direct).abs() < 1e-12);
        // gamma0 V + sqrt(gamma0^2 t0 + t) G has edge gamma0 E_-(t0 + t / gamma0^2)
        let scaled = v.scaled(e.gamma0).unwrap();
        let t = 0.05;
        let via_scaled = find_edge(&scaled, e.gamma0 * e.gamma0 * 0.3 + t).unwrap().e_minus;
        assert!((e.e_lambda(&v, t).unwrap() - via_scaled).abs() < 1e-9);
    }

    #[test]
    fn coupled_run_records_requested_steps() {
        let v = quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, 30).unwrap();
        let edge = LambdaEdge::new(&v, 0.5).unwrap();
        let steps = [0u64, 2, 5];
        let dt = 1e-3;
        let el: Vec<f64> = steps.iter().map(|&s| edge.e_lambda(&v, s as f64 * dt).unwrap()).collect();
        let a = coupled_edge_run(&v, &edge, &el, &steps, dt, 2, 9, 0).unwrap();
        let b = coupled_edge_run(&v, &edge, &el, &steps, dt, 2, 9, 0).unwrap();
        assert_eq!(a.times.len(), 3);
        assert!((a.times[2] - 5e-3).abs() < 1e-15);
        assert_eq!(a.differences, b.differences);
        assert_eq!(a.differences[0].len(), 2);
    }
}
