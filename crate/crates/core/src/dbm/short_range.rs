//! Joint evolution of the interpolating process `z(t, alpha)` and its
//! short-range approximation `z_hat(t, alpha)` in shifted coordinates.
//!
//! Both are driven by the same Brownian labels. `z` follows full DBM; the
//! shifted `z_tilde = z - E_-(t, alpha)` feeds the long-range sums of
//! `z_hat`, whose drift depends on the index regime:
//!
//! * `i <= 0` and `i > i_*/2`: short-range sum plus the complementary
//!   `z_tilde` sum plus `Re m_t(E_-(t, alpha), alpha)`;
//! * `1 <= i <= N^{omega_A}`: short-range sum plus the tail integral of the
//!   `alpha = 0` law over `I_i(0, t)^c` plus `Re m_t(E_-(t, 0), 0)`;
//! * otherwise: short-range sum, the tail integral over `J \ I_i`, the far
//!   `z_tilde` particles (`j <= 0` or `j >= 3 i_*/4`) and `Re m_t(E_-(t, alpha), alpha)`.
//!
//! Tail integrals exclude a window of half the local classical spacing
//! around the particle, which only acts when a particle leaves its interval.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ledger::NoiseLedger;
use super::particles::{coulomb_drift, integrate_blocks, Block, DriftField, ParticleSystem, StepStats};
use super::profile::{edge_tail, middle_tail, ProfileSeries};
use super::topology::{Regime, ShortRangeTopology};
use crate::error::{Error, Result};

/// Deterministic inputs of the short-range dynamics.
pub struct ShortRangeSetup<'a> {
    pub topology: &'a ShortRangeTopology,
    /// `rho_t(., alpha)` snapshots.
    pub profile: &'a ProfileSeries,
    /// `rho_t(., 0)` snapshots, used for `1 <= i <= N^{omega_A}`.
    pub profile_zero: &'a ProfileSeries,
}

/// `(1/N) sum_{j in A(i), j != i} 1/(x_i - x_j)` over the window `-N..=N`.
pub fn short_range_sums(x: &[f64], topo: &ShortRangeTopology, out: &mut [f64]) {
    let n = topo.n as i64;
    out.iter_mut().for_each(|o| *o = 0.0);
    for k in 0..x.len() {
        let i = k as i64 - n;
        let hi = topo.row(i).1;
        let xi = x[k];
        let mut acc = 0.0;
        for kj in k + 1..=(hi + n) as usize {
            let g = 1.0 / (xi - x[kj]);
            acc += g;
            out[kj] -= g;
        }
        out[k] += acc;
    }
    let inv = 1.0 / topo.n as f64;
    out.iter_mut().for_each(|o| *o *= inv);
}

struct ShortRangeField<'a> {
    setup: &'a ShortRangeSetup<'a>,
    full: Vec<f64>,
    tilde: Vec<f64>,
    a_tilde: Vec<f64>,
    guesses: Vec<Option<Complex64>>,
}

impl DriftField for ShortRangeField<'_> {
    fn drift(&mut self, t: f64, blocks: &[Block], out: &mut [Vec<f64>]) -> Result<()> {
        let topo = self.setup.topology;
        let n = topo.n as i64;
        let nf = topo.n as f64;
        let z = &blocks[0].positions;
        let zh = &blocks[1].positions;
        coulomb_drift(z, nf, &mut self.full);
        let e_minus = self.setup.profile.e_minus(t);
        for (zt, zz) in self.tilde.iter_mut().zip(z) {
            *zt = zz - e_minus;
        }
        short_range_sums(&self.tilde, topo, &mut self.a_tilde);
        short_range_sums(zh, topo, &mut out[1]);
        out[0].copy_from_slice(&self.full);

        let snap = self.setup.profile.nearest(t);
        let snap0 = self.setup.profile_zero.nearest(t);
        let re_m = self.setup.profile.re_m_edge(t);
        let re_m0 = self.setup.profile_zero.re_m_edge(t);
        let three_quarter = (3 * topo.i_star + 3) / 4;
        let j_top = snap.gamma_hat(three_quarter);
        for k in 0..zh.len() {
            let i = k as i64 - n;
            let y = zh[k];
            let extra = match topo.regime(i) {
                Regime::Padding | Regime::Bulk => self.full[k] - self.a_tilde[k] + re_m,
                Regime::Edge => {
                    let (lo, hi) = topo.row(i);
                    let interval = (snap0.gamma_hat(lo), snap0.gamma_hat(hi));
                    let g = &mut self.guesses[i as usize];
                    edge_tail(snap0, y, interval, snap0.excision(i), g)? + re_m0
                }
                Regime::Middle => {
                    let (lo, hi) = topo.row(i);
                    let interval = (snap.gamma_hat(lo), snap.gamma_hat(hi));
                    let tail = middle_tail(snap, y, interval, j_top, snap.excision(i));
                    let zi = self.tilde[k];
                    let mut far = 0.0;
                    for j in -n..=0.min(lo - 1) {
                        far += 1.0 / (zi - self.tilde[(j + n) as usize]);
                    }
                    let start = three_quarter.max(hi + 1);
                    for j in start..=n {
                        far += 1.0 / (zi - self.tilde[(j + n) as usize]);
                    }
                    tail + far / nf + re_m
                }
            };
            out[1][k] += extra;
        }
        Ok(())
    }
}

/// Result of a joint run: both processes at the final time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShortRangeOutcome {
    pub z_tilde: ParticleSystem,
    pub z_hat: ParticleSystem,
    pub stats: StepStats,
    /// `z_hat` after every base step, with its time, when recording was requested.
    pub path: Vec<(f64, Vec<f64>)>,
    /// `max_i |z_tilde_i - z_hat_i|` over `1..=track` after every base step.
    pub deviation: Vec<(f64, f64)>,
}

/// Evolves `z0` (unshifted, window `-N..=N`) and `z_hat(0) = z0 - E_-(0, alpha)`
/// for `duration` on the ledger grid. `track` bounds the indices whose
/// deviation is monitored; `record` keeps the `z_hat` path.
pub fn short_range_evolve(
    z0: &ParticleSystem,
    setup: &ShortRangeSetup<'_>,
    duration: f64,
    ledger: &mut NoiseLedger,
    track: usize,
    record: bool,
) -> Result<ShortRangeOutcome> {
    let topo = setup.topology;
    let n = topo.n;
    if z0.len() != 2 * n + 1 || z0.index_offset != -(n as i64) {
        return Err(Error::ShapeMismatch(format!("short-range dynamics need the window -{n}..={n}")));
    }
    let e0 = setup.profile.e_minus(z0.time);
    let zhat0: Vec<f64> = z0.positions.iter().map(|x| x - e0).collect();
    let dt = ledger.dt_base();
    let steps = (duration / dt).round();
    if (steps * dt - duration).abs() > 1e-9 * duration.max(dt) {
        return Err(Error::Config(format!("duration {duration} is not a multiple of the ledger step {dt}")));
    }
    let steps = steps as u64;
    let mut path = Vec::new();
    let mut deviation = Vec::new();
    if record {
        path.push((z0.time, zhat0.clone()));
    }
    let track = track.min(n);
    let dev = |z: &[f64], zh: &[f64], e: f64| -> f64 {
        (n + 1..=n + track).map(|k| (z[k] - e - zh[k]).abs()).fold(0.0, f64::max)
    };
    deviation.push((z0.time, 0.0));
    if steps == 0 {
        let mut zt = z0.clone();
        zt.positions = zhat0.clone();
        let mut zh = zt.clone();
        zh.positions = zhat0;
        return Ok(ShortRangeOutcome { z_tilde: zt, z_hat: zh, stats: StepStats::default(), path, deviation });
    }
    let mut blocks = vec![
        Block { positions: z0.positions.clone(), label_offset: z0.index_offset },
        Block { positions: zhat0, label_offset: z0.index_offset },
    ];
    let mut field = ShortRangeField {
        setup,
        full: vec![0.0; 2 * n + 1],
        tilde: vec![0.0; 2 * n + 1],
        a_tilde: vec![0.0; 2 * n + 1],
        guesses: vec![None; topo.omega_a_cut.max(0) as usize + 1],
    };
    let stats = integrate_blocks(&mut blocks, &mut field, z0.time, steps, n as f64, ledger, |_, t, b| {
        let e = setup.profile.e_minus(t);
        deviation.push((t, dev(&b[0].positions, &b[1].positions, e)));
        if record {
            path.push((t, b[1].positions.clone()));
        }
    })?;
    let t_end = z0.time + steps as f64 * dt;
    let e_end = setup.profile.e_minus(t_end);
    let mut z_tilde = z0.clone();
    z_tilde.positions = blocks[0].positions.iter().map(|x| x - e_end).collect();
    z_tilde.time = t_end;
    let mut z_hat = z0.clone();
    z_hat.positions = blocks.pop().expect("two blocks").positions;
    z_hat.time = t_end;
    Ok(ShortRangeOutcome { z_tilde, z_hat, stats, path, deviation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbm::particles::{evolve_shifted, sentinel};
    use crate::dbm::profile::ProfileSnapshot;
    use crate::rng::{derive_stream, Role};

    fn full_topology(n: usize) -> ShortRangeTopology {
        let ni = n as i64;
        ShortRangeTopology { n, ell: 1, omega_a_cut: 1, i_star: 2, row_intervals: vec![(-ni, ni); 2 * n + 1] }
    }

    #[test]
    fn full_range_without_tails_is_shifted_dbm() {
        let n = 6;
        let stream = derive_stream(3, 0, Role::Brownian);
        let mut pos: Vec<f64> = (-(n as i64)..=0).map(|i| sentinel(i, n, 1.0, true)).collect();
        pos.extend((1..=n).map(|k| -2.0 + 0.3 * k as f64));
        let z0 = ParticleSystem::new(pos, -(n as i64), stream, n as f64).unwrap();
        let re_m = 0.8;
        let dt = 1e-3;
        let duration = 0.05;
        // E_-(t) = -2 - re_m t, consistent with dE_-/dt = -Re m
        let snaps = vec![
            ProfileSnapshot::empty(0.0, -2.0, re_m, vec![0.1, 0.2]),
            ProfileSnapshot::empty(duration, -2.0 - re_m * duration, re_m, vec![0.1, 0.2]),
        ];
        let series = ProfileSeries::new(snaps).unwrap();
        let topo = full_topology(n);
        let setup = ShortRangeSetup { topology: &topo, profile: &series, profile_zero: &series };
        let mut ledger = NoiseLedger::new(stream, dt).unwrap();
        let out = short_range_evolve(&z0, &setup, duration, &mut ledger, n, false).unwrap();
        let mut shifted = z0.clone();
        shifted.positions.iter_mut().for_each(|x| *x += 2.0);
        let (reference, _) = evolve_shifted(&shifted, duration, dt, re_m, Some(&mut ledger)).unwrap();
        for k in 0..z0.len() {
            assert!((out.z_hat.positions[k] - out.z_tilde.positions[k]).abs() < 1e-9);
            assert!((out.z_hat.positions[k] - reference.positions[k]).abs() < 1e-6, "k={k}");
        }
    }

    #[test]
    fn zero_duration_returns_shifted_input() {
        let n = 4;
        let stream = derive_stream(3, 0, Role::Brownian);
        let mut pos: Vec<f64> = (-(n as i64)..=0).map(|i| sentinel(i, n, 1.0, true)).collect();
        pos.extend((1..=n).map(|k| -2.0 + 0.3 * k as f64));
        let z0 = ParticleSystem::new(pos, -(n as i64), stream, n as f64).unwrap();
        let series = ProfileSeries::new(vec![ProfileSnapshot::empty(0.0, -2.0, 1.0, vec![0.1])]).unwrap();
        let topo = full_topology(n);
        let setup = ShortRangeSetup { topology: &topo, profile: &series, profile_zero: &series };
        let mut ledger = NoiseLedger::new(stream, 1e-3).unwrap();
        let out = short_range_evolve(&z0, &setup, 0.0, &mut ledger, n, true).unwrap();
        for (a, b) in out.z_hat.positions.iter().zip(&z0.positions) {
            assert_eq!(*a, b + 2.0);
        }
        assert_eq!(out.path.len(), 1);
    }
}
