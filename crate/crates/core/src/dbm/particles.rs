//! Ordered particle systems, padding with far sentinels, and the adaptive
//! Euler–Maruyama integrator for DBM-type dynamics.

use serde::{Deserialize, Serialize};

use super::ledger::{NoiseLedger, MAX_LEVEL};
use crate::error::{Error, Result};
use crate::rng::StreamId;

/// Finest level whose Brownian values are generated for a whole base step at once.
const PATH_CACHE_LEVEL: u32 = 4;

/// Smallest fraction of an adjacent gap that one accepted substep may leave.
const GAP_FLOOR: f64 = 0.25;

/// An ordered configuration. `positions[k]` carries the index (and Brownian
/// label) `index_offset + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleSystem {
    pub positions: Vec<f64>,
    pub time: f64,
    pub index_offset: i64,
    pub stream: StreamId,
    /// The `N` of `dB/sqrt(N)` and `(1/N) sum`, which for padded systems
    /// differs from the particle count.
    pub normalization: f64,
}

impl ParticleSystem {
    pub fn new(positions: Vec<f64>, index_offset: i64, stream: StreamId, normalization: f64) -> Result<Self> {
        if positions.windows(2).any(|w| !(w[0] < w[1])) || positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::Config("positions must be finite and strictly increasing".into()));
        }
        Ok(Self { positions, time: 0.0, index_offset, stream, normalization })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Position carrying index `i`.
    pub fn at(&self, i: i64) -> Option<f64> {
        let k = i - self.index_offset;
        (k >= 0).then(|| self.positions.get(k as usize).copied()).flatten()
    }

    pub fn last_index(&self) -> i64 {
        self.index_offset + self.positions.len() as i64 - 1
    }

    pub fn is_ordered(&self) -> bool {
        self.positions.windows(2).all(|w| w[0] < w[1])
    }
}

/// Layout of the padded systems: x-style pads both sides around the core
/// (indices `-N..=N`), y-style pads only the left (indices `-N..=N` with the
/// core at `1..=N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SideLayout {
    XStyle,
    YStyle,
}

/// Sentinel position `-3 N^{C_V} + i N` (left) or `3 N^{C_V} + i N` (right).
pub fn sentinel(i: i64, n: usize, c_v: f64, left: bool) -> f64 {
    let base = 3.0 * (n as f64).powf(c_v);
    let shift = i as f64 * n as f64;
    if left {
        -base + shift
    } else {
        base + shift
    }
}

/// Pads a core system of `N` particles (`core.positions[k]` is
/// `lambda_{k+1}`) to the index window `-N..=N`. For x-style the core
/// particle `lambda_{i + i0 - 1}` sits at index `i`; `i0` is 1-based.
pub fn pad_system(core: &ParticleSystem, i0: usize, n: usize, c_v: f64, layout: SideLayout) -> Result<ParticleSystem> {
    if core.len() != n {
        return Err(Error::ShapeMismatch(format!("core has {} particles, expected N = {n}", core.len())));
    }
    let (n_i, i0_i) = (n as i64, i0 as i64);
    let mut out = Vec::with_capacity(2 * n + 1);
    match layout {
        SideLayout::XStyle => {
            if i0 < 1 || i0 > n {
                return Err(Error::IndexOverflow(format!("i0 = {i0} outside [1, {n}]")));
            }
            for i in -n_i..=n_i {
                let x = if i <= 1 - i0_i {
                    sentinel(i, n, c_v, true)
                } else if i <= n_i + 1 - i0_i {
                    core.positions[(i + i0_i - 2) as usize]
                } else {
                    sentinel(i, n, c_v, false)
                };
                out.push(x);
            }
        }
        SideLayout::YStyle => {
            for i in -n_i..=0 {
                out.push(sentinel(i, n, c_v, true));
            }
            out.extend_from_slice(&core.positions);
        }
    }
    let mut padded = ParticleSystem::new(out, -n_i, core.stream, core.normalization)
        .map_err(|_| Error::Config("core overlaps the sentinel blocks".into()))?;
    padded.time = core.time;
    Ok(padded)
}

/// Recovers the core from a padded system.
pub fn strip_system(padded: &ParticleSystem, i0: usize, n: usize, layout: SideLayout) -> Result<ParticleSystem> {
    let (first, count) = match layout {
        SideLayout::XStyle => (2 - i0 as i64, n),
        SideLayout::YStyle => (1, n),
    };
    let k = (first - padded.index_offset) as usize;
    if padded.index_offset > first || k + count > padded.len() {
        return Err(Error::IndexOverflow("padded window does not contain the core".into()));
    }
    let mut core = ParticleSystem::new(padded.positions[k..k + count].to_vec(), first, padded.stream, padded.normalization)?;
    core.time = padded.time;
    Ok(core)
}

/// `(1/norm) sum_{j != i} 1/(x_i - x_j)` for every `i`, accumulated pairwise.
pub fn coulomb_drift(x: &[f64], norm: f64, out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for i in 0..x.len() {
        let xi = x[i];
        let mut acc = 0.0;
        for j in i + 1..x.len() {
            let g = 1.0 / (xi - x[j]);
            acc += g;
            out[j] -= g;
        }
        out[i] += acc;
    }
    let inv = 1.0 / norm;
    out.iter_mut().for_each(|o| *o *= inv);
}

/// One ordered block of particles moved by the integrator.
#[derive(Debug, Clone)]
pub struct Block {
    pub positions: Vec<f64>,
    /// Brownian label of `positions[0]`.
    pub label_offset: i64,
}

impl Block {
    fn min_gap(&self) -> f64 {
        self.positions.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }
}

/// Drift of a set of blocks at time `t`.
pub trait DriftField {
    fn drift(&mut self, t: f64, blocks: &[Block], out: &mut [Vec<f64>]) -> Result<()>;
}

/// Plain DBM drift plus a constant shift (the `Re m` term of shifted coordinates).
pub struct Coulomb {
    pub normalization: f64,
    pub shift: f64,
}

impl DriftField for Coulomb {
    fn drift(&mut self, _t: f64, blocks: &[Block], out: &mut [Vec<f64>]) -> Result<()> {
        for (b, o) in blocks.iter().zip(out.iter_mut()) {
            coulomb_drift(&b.positions, self.normalization, o);
            o.iter_mut().for_each(|x| *x += self.shift);
        }
        Ok(())
    }
}

/// Integrator bookkeeping returned alongside the evolved state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub base_steps: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub max_level: u32,
}

/// Euler–Maruyama on dyadic substeps of the ledger's base step. A substep
/// is accepted when `max |drift| h <= gap/2` and the move keeps every block
/// strictly ordered with no adjacent gap shrinking below `GAP_FLOOR` of its
/// previous value; otherwise it is bisected. Blocks sharing a label share
/// the same Brownian path.
pub fn integrate_blocks<F, O>(
    blocks: &mut [Block],
    field: &mut F,
    t0: f64,
    base_steps: u64,
    normalization: f64,
    ledger: &mut NoiseLedger,
    mut observer: O,
) -> Result<StepStats>
where
    F: DriftField + ?Sized,
    O: FnMut(u64, f64, &[Block]),
{
    let dt = ledger.dt_base();
    let first_step = (t0 / dt).round();
    if (first_step * dt - t0).abs() > 1e-9 * dt.max(t0.abs()) {
        return Err(Error::Config(format!("start time {t0} is not on the ledger grid (dt = {dt})")));
    }
    let first_step = first_step as u64;
    let noise_scale = 1.0 / normalization.sqrt();
    let lo_label = blocks.iter().map(|b| b.label_offset).min().unwrap_or(0);
    let hi_label = blocks.iter().map(|b| b.label_offset + b.positions.len() as i64).max().unwrap_or(0);
    let n_labels = (hi_label - lo_label).max(0) as usize;

    let mut drift: Vec<Vec<f64>> = blocks.iter().map(|b| vec![0.0; b.positions.len()]).collect();
    let mut trial: Vec<Vec<f64>> = drift.clone();
    let mut stats = StepStats::default();
    let mut level = 0u32;
    // Brownian values at the current substep point and at the trial end point
    let mut current = vec![0.0; n_labels];
    let mut next = vec![0.0; n_labels];

    for s in 0..base_steps {
        let step = first_step + s;
        let t_step = step as f64 * dt;
        let mut path_level = 0u32;
        let mut paths: Vec<Vec<f64>> = Vec::new();
        let mut j = 0u64;
        current.iter_mut().for_each(|c| *c = 0.0);
        let mut have_drift = false;
        loop {
            if (level > path_level && path_level < PATH_CACHE_LEVEL) || paths.is_empty() {
                path_level = path_level.max(level).min(PATH_CACHE_LEVEL);
                paths = (0..n_labels).map(|k| ledger.bridge_path(lo_label + k as i64, step, path_level)).collect();
            }
            let h = dt / (1u64 << level) as f64;
            let t = t_step + j as f64 * h;
            if !have_drift {
                field.drift(t, blocks, &mut drift)?;
                have_drift = true;
            }
            let shrink = blocks.iter().zip(&drift).any(|(b, d)| {
                let max_d = d.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                max_d * h > 0.5 * b.min_gap()
            });
            let mut ok = !shrink;
            if ok {
                if level > path_level {
                    // beyond the cached resolution: descend the bridge per label
                    for (k, nb) in next.iter_mut().enumerate() {
                        *nb = ledger.bridge_value(lo_label + k as i64, step, level, j + 1);
                    }
                } else {
                    let sh = path_level - level;
                    for (nb, p) in next.iter_mut().zip(&paths) {
                        *nb = p[((j + 1) << sh) as usize];
                    }
                }
                for ((b, d), out) in blocks.iter().zip(&drift).zip(trial.iter_mut()) {
                    for (k, o) in out.iter_mut().enumerate() {
                        let label = (b.label_offset + k as i64 - lo_label) as usize;
                        *o = b.positions[k] + d[k] * h + noise_scale * (next[label] - current[label]);
                    }
                    let collapsed = out
                        .windows(2)
                        .zip(b.positions.windows(2))
                        .any(|(w, p)| !(w[1] - w[0] >= GAP_FLOOR * (p[1] - p[0])));
                    if collapsed || out.iter().any(|x| !x.is_finite()) {
                        ok = false;
                        break;
                    }
                }
            }
            if ok {
                for (b, out) in blocks.iter_mut().zip(&trial) {
                    b.positions.copy_from_slice(out);
                }
                current.copy_from_slice(&next);
                have_drift = false;
                stats.accepted += 1;
                j += 1;
                // return to the coarsest level the position allows
                while level > 0 && j % 2 == 0 {
                    j /= 2;
                    level -= 1;
                }
                if j == 1u64 << level {
                    break;
                }
            } else {
                stats.rejected += 1;
                level += 1;
                j *= 2;
                stats.max_level = stats.max_level.max(level);
                if level > MAX_LEVEL || dt / ((1u64 << level) as f64) < 1e-16 {
                    return Err(Error::StepUnderflow { time: t, dt: dt / (1u64 << level.min(63)) as f64 });
                }
            }
        }
        level = 0;
        stats.base_steps += 1;
        observer(step + 1, (step + 1) as f64 * dt, blocks);
    }
    Ok(stats)
}

fn base_steps_for(duration: f64, dt: f64) -> Result<u64> {
    let n = (duration / dt).round();
    if (n * dt - duration).abs() > 1e-9 * duration.max(dt) {
        return Err(Error::Config(format!("duration {duration} is not a multiple of the ledger step {dt}")));
    }
    Ok(n as u64)
}

/// Evolves `system` under `dx_i = dB_{label(i)}/sqrt(N) + (1/N) sum_j 1/(x_i - x_j) dt`.
///
/// With `shared_noise` the Brownian paths come from that ledger (whose base
/// step must divide `duration`); otherwise a private ledger keyed by the
/// system's stream is used with base step `duration / ceil(duration / dt_max)`.
pub fn sde_evolve(
    system: &ParticleSystem,
    duration: f64,
    dt_max: f64,
    shared_noise: Option<&mut NoiseLedger>,
) -> Result<ParticleSystem> {
    evolve_shifted(system, duration, dt_max, 0.0, shared_noise).map(|(s, _)| s)
}

/// As [`sde_evolve`] with an extra constant drift `shift`, also returning step statistics.
pub fn evolve_shifted(
    system: &ParticleSystem,
    duration: f64,
    dt_max: f64,
    shift: f64,
    shared_noise: Option<&mut NoiseLedger>,
) -> Result<(ParticleSystem, StepStats)> {
    if duration < 0.0 {
        return Err(Error::Config(format!("duration {duration} must be nonnegative")));
    }
    if duration == 0.0 {
        return Ok((system.clone(), StepStats::default()));
    }
    let mut private;
    let ledger = match shared_noise {
        Some(l) => l,
        None => {
            let steps = (duration / dt_max).ceil().max(1.0);
            private = NoiseLedger::new(system.stream, duration / steps)?;
            &mut private
        }
    };
    let base_steps = base_steps_for(duration, ledger.dt_base())?;
    let mut blocks = vec![Block { positions: system.positions.clone(), label_offset: system.index_offset }];
    let mut field = Coulomb { normalization: system.normalization, shift };
    let stats = integrate_blocks(&mut blocks, &mut field, system.time, base_steps, system.normalization, ledger, |_, _, _| {})?;
    let mut out = system.clone();
    out.positions = blocks.pop().expect("one block").positions;
    out.time = system.time + base_steps as f64 * ledger.dt_base();
    Ok((out, stats))
}

/// Trajectory as CSV rows `step, time, index, position`, one row per particle per base step.
pub fn trajectory_csv(
    system: &ParticleSystem,
    duration: f64,
    ledger: &mut NoiseLedger,
) -> Result<(ParticleSystem, String)> {
    let base_steps = base_steps_for(duration, ledger.dt_base())?;
    let mut blocks = vec![Block { positions: system.positions.clone(), label_offset: system.index_offset }];
    let mut field = Coulomb { normalization: system.normalization, shift: 0.0 };
    let mut csv = String::from("step,time,index,position\n");
    let write_rows = |csv: &mut String, step: u64, t: f64, xs: &[f64]| {
        for (k, x) in xs.iter().enumerate() {
            csv.push_str(&format!("{step},{t:.16e},{},{x:.16e}\n", system.index_offset + k as i64));
        }
    };
    write_rows(&mut csv, 0, system.time, &system.positions);
    integrate_blocks(&mut blocks, &mut field, system.time, base_steps, system.normalization, ledger, |step, t, b| {
        write_rows(&mut csv, step, t, &b[0].positions)
    })?;
    let mut out = system.clone();
    out.positions = blocks.pop().expect("one block").positions;
    out.time = system.time + base_steps as f64 * ledger.dt_base();
    Ok((out, csv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, Role};

    fn stream(trial: u64) -> StreamId {
        derive_stream(2024, trial, Role::Brownian)
    }

    #[test]
    fn free_particle_variance() {
        let tau = 0.3;
        let xs: Vec<f64> = (0..4000)
            .map(|trial| {
                let s = ParticleSystem::new(vec![0.5], 1, stream(trial), 1.0).unwrap();
                sde_evolve(&s, tau, 0.1, None).unwrap().positions[0] - 0.5
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.03);
        assert!((var / tau - 1.0).abs() < 0.06, "variance {var}");
    }

    #[test]
    fn two_particle_gap_ode() {
        // dg = 2/(N g) dt  =>  g(t) = sqrt(g0^2 + 4 t / N)
        let n = 2.0;
        let s = ParticleSystem::new(vec![-0.05, 0.05], 1, stream(0), n).unwrap();
        let tau = 0.02;
        let dt = 1e-5;
        let mut silent = NoiseLedger::silent(stream(0), dt).unwrap();
        let out = sde_evolve(&s, tau, dt, Some(&mut silent)).unwrap();
        let g = out.positions[1] - out.positions[0];
        let expect = (0.1f64.powi(2) + 4.0 * tau / n).sqrt();
        assert!((g / expect - 1.0).abs() < 1e-3, "gap {g} vs {expect}");
    }

    #[test]
    fn shared_ledger_couples_identical_systems() {
        let s = ParticleSystem::new(vec![-1.0, -0.2, 0.4, 1.3], 1, stream(5), 4.0).unwrap();
        let mut ledger = NoiseLedger::new(stream(99), 1e-3).unwrap();
        let a = sde_evolve(&s, 0.05, 1e-3, Some(&mut ledger)).unwrap();
        let b = sde_evolve(&s, 0.05, 1e-3, Some(&mut ledger)).unwrap();
        assert_eq!(a.positions, b.positions);
        assert!(a.is_ordered());
        assert!((a.time - 0.05).abs() < 1e-15);
    }

    #[test]
    fn ledger_replay_after_serialisation() {
        let s = ParticleSystem::new(vec![-0.3, 0.1, 0.9], 1, stream(6), 3.0).unwrap();
        let mut ledger = NoiseLedger::new(stream(7), 2e-3).unwrap();
        let a = sde_evolve(&s, 0.02, 2e-3, Some(&mut ledger)).unwrap();
        let mut buf = Vec::new();
        ledger.write_to(&mut buf).unwrap();
        let mut back = NoiseLedger::read_from(buf.as_slice()).unwrap();
        let b = sde_evolve(&s, 0.02, 2e-3, Some(&mut back)).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn zero_duration_is_identity() {
        let s = ParticleSystem::new(vec![0.0, 1.0], 1, stream(0), 2.0).unwrap();
        assert_eq!(sde_evolve(&s, 0.0, 0.1, None).unwrap(), s);
    }

    #[test]
    fn padding_layouts() {
        let n = 4;
        let core = ParticleSystem::new(vec![-0.7, -0.2, 0.1, 0.5], 1, stream(0), n as f64).unwrap();
        let x = pad_system(&core, 2, n, 1.0, SideLayout::XStyle).unwrap();
        assert_eq!(x.len(), 2 * n + 1);
        assert_eq!(x.at(-4), Some(-28.0));
        // i0 = 2: index 1 - i0 = -1 is the last left sentinel, index 0 carries lambda_1
        assert_eq!(x.at(-1), Some(-3.0 * 4.0 - 4.0));
        assert_eq!(x.at(0), Some(-0.7));
        assert_eq!(x.at(3), Some(0.5));
        assert_eq!(x.at(4), Some(12.0 + 16.0));
        let back = strip_system(&x, 2, n, SideLayout::XStyle).unwrap();
        assert_eq!(back.positions, core.positions);

        let y = pad_system(&core, 1, n, 1.0, SideLayout::YStyle).unwrap();
        assert_eq!(y.at(0), Some(-12.0));
        assert_eq!(y.at(1), Some(-0.7));
        assert_eq!(strip_system(&y, 1, n, SideLayout::YStyle).unwrap().positions, core.positions);
        assert!(matches!(pad_system(&core, 0, n, 1.0, SideLayout::XStyle), Err(Error::IndexOverflow(_))));
        assert!(matches!(pad_system(&core, 5, n, 1.0, SideLayout::XStyle), Err(Error::IndexOverflow(_))));
    }

    #[test]
    fn trajectory_dump_shape() {
        let s = ParticleSystem::new(vec![0.0, 1.0], 1, stream(0), 2.0).unwrap();
        let mut ledger = NoiseLedger::new(stream(1), 0.01).unwrap();
        let (_, csv) = trajectory_csv(&s, 0.03, &mut ledger).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 4);
    }
}
