//! The linearised generator `L = B + V` of the short-range dynamics, its
//! propagator and numerical probes of finite speed, energy decay and mass.
//!
//! On a time interval where the snapshot is fixed the propagator is advanced
//! by `exp(hV/2) (I - hB)^{-1} exp(hV/2)`. `I - hB` is a symmetric M-matrix
//! with unit row sums, so each factor is positive and contracts every `l^p`
//! norm. The kernel solve is a dense Cholesky per connected block of `A`;
//! the Cholesky factor of an M-matrix keeps its sign pattern in floating
//! point, which makes positivity exact.

use std::sync::Arc;

use faer::linalg::solvers::SpSolver;
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use super::particles::ParticleSystem;
use super::profile::{edge_potential, middle_potential, ProfileSeries};
use super::topology::{Regime, ShortRangeTopology};
use crate::error::{Error, Result};

/// `k_ij = (1/N)/(x_i - x_j)^2` on the rows of `A` plus a diagonal `V <= 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratorSnapshot {
    pub time: f64,
    /// Label of the first row.
    pub offset: i64,
    /// Inclusive label interval of each row.
    pub rows: Vec<(i64, i64)>,
    /// `weights[k][j - rows[k].0]`, zero on the diagonal.
    pub weights: Vec<Vec<f64>>,
    pub potential: Vec<f64>,
}

impl GeneratorSnapshot {
    /// Kernel on `rows` from ordered `positions`; `rows` must be symmetric
    /// and contain the diagonal.
    pub fn from_positions(
        time: f64,
        offset: i64,
        positions: &[f64],
        rows: Vec<(i64, i64)>,
        normalization: f64,
        potential: Vec<f64>,
    ) -> Result<Self> {
        let len = positions.len();
        if rows.len() != len || potential.len() != len {
            return Err(Error::ShapeMismatch(format!("{} positions, {} rows, {} potentials", len, rows.len(), potential.len())));
        }
        if positions.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("generator positions must be strictly increasing".into()));
        }
        if let Some(v) = potential.iter().find(|v| !(**v <= 0.0)) {
            return Err(Error::Config(format!("potential {v} is not nonpositive")));
        }
        let last = offset + len as i64 - 1;
        for (k, &(lo, hi)) in rows.iter().enumerate() {
            let i = offset + k as i64;
            if !(lo <= i && i <= hi && lo >= offset && hi <= last) {
                return Err(Error::Config(format!("row {i} = [{lo}, {hi}] must contain {i} and stay in the window")));
            }
        }
        for (k, &(lo, hi)) in rows.iter().enumerate() {
            let i = offset + k as i64;
            for j in lo..=hi {
                let (a, b) = rows[(j - offset) as usize];
                if i < a || i > b {
                    return Err(Error::Config(format!("rows are not symmetric at ({i}, {j})")));
                }
            }
        }
        let inv = 1.0 / normalization;
        let weights = rows
            .iter()
            .enumerate()
            .map(|(k, &(lo, hi))| {
                let xi = positions[k];
                (lo..=hi)
                    .map(|j| {
                        let kj = (j - offset) as usize;
                        if kj == k {
                            0.0
                        } else {
                            let d = xi - positions[kj];
                            inv / (d * d)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self { time, offset, rows, weights, potential })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// `k_ij` for labels `i`, `j` (zero off `A`).
    pub fn weight(&self, i: i64, j: i64) -> f64 {
        let k = (i - self.offset) as usize;
        let (lo, hi) = self.rows[k];
        if j < lo || j > hi {
            0.0
        } else {
            self.weights[k][(j - lo) as usize]
        }
    }

    /// `(Bu)_i = sum_j k_ij (u_j - u_i)`.
    pub fn apply_kernel(&self, u: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.weights)
            .enumerate()
            .map(|(k, (&(lo, _), w))| {
                let base = (lo - self.offset) as usize;
                w.iter().enumerate().map(|(q, kij)| kij * (u[base + q] - u[k])).sum()
            })
            .collect()
    }

    /// `(Lu)_i = (Bu)_i + V_i u_i`.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = self.apply_kernel(u);
        for ((o, v), x) in out.iter_mut().zip(&self.potential).zip(u) {
            *o += v * x;
        }
        out
    }

    /// Connected blocks of `A` as half-open position ranges.
    pub fn components(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        let mut reach = 0usize;
        for (k, &(_, hi)) in self.rows.iter().enumerate() {
            if k > reach && k > start {
                out.push((start, k));
                start = k;
            }
            reach = reach.max((hi - self.offset) as usize).max(k);
        }
        if !self.rows.is_empty() {
            out.push((start, self.rows.len()));
        }
        out
    }
}

/// Snapshot of the generator at the configuration `zhat` (window `-N..=N`,
/// shifted coordinates). `V` is nonzero only for `1 <= i <= i_*/2`, where it is
/// `-int rho_t/(zhat_i - E)^2` over the same region as the tail drift.
pub fn build_generator(
    zhat: &ParticleSystem,
    topology: &ShortRangeTopology,
    profile: &ProfileSeries,
    profile_zero: &ProfileSeries,
) -> Result<GeneratorSnapshot> {
    let n = topology.n as i64;
    if zhat.len() != 2 * topology.n + 1 || zhat.index_offset != -n {
        return Err(Error::ShapeMismatch(format!("generator needs the window -{n}..={n}")));
    }
    let t = zhat.time;
    let snap = profile.nearest(t);
    let snap0 = profile_zero.nearest(t);
    let j_top = snap.gamma_hat((3 * topology.i_star + 3) / 4);
    let mut guess = None;
    let mut potential = vec![0.0; zhat.len()];
    for (k, v) in potential.iter_mut().enumerate() {
        let i = k as i64 - n;
        let y = zhat.positions[k];
        let raw = match topology.regime(i) {
            Regime::Padding | Regime::Bulk => 0.0,
            Regime::Edge => {
                let (lo, hi) = topology.row(i);
                edge_potential(snap0, y, (snap0.gamma_hat(lo), snap0.gamma_hat(hi)), snap0.excision(i), &mut guess)?
            }
            Regime::Middle => {
                let (lo, hi) = topology.row(i);
                middle_potential(snap, y, (snap.gamma_hat(lo), snap.gamma_hat(hi)), j_top, snap.excision(i))
            }
        };
        if !raw.is_finite() {
            return Err(Error::QuadratureFailure(format!("potential at index {i} is {raw}")));
        }
        // the outer part is a difference of two transforms and may round above zero
        *v = raw.min(0.0);
    }
    GeneratorSnapshot::from_positions(t, -n, &zhat.positions, topology.row_intervals.clone(), zhat.normalization, potential)
}

/// Time-indexed snapshots. Snapshot `k` governs `[times[k], times[k + 1])`;
/// the first and last extend to all earlier and later times.
pub trait GeneratorSource {
    fn times(&self) -> &[f64];
    fn snapshot(&self, k: usize) -> Result<Arc<GeneratorSnapshot>>;
}

/// Precomputed snapshots.
pub struct SnapshotPath {
    pub snapshots: Vec<Arc<GeneratorSnapshot>>,
    times: Vec<f64>,
}

impl SnapshotPath {
    pub fn new(snapshots: Vec<GeneratorSnapshot>) -> Result<Self> {
        let times: Vec<f64> = snapshots.iter().map(|s| s.time).collect();
        if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("snapshot times must be non-empty and increasing".into()));
        }
        Ok(Self { snapshots: snapshots.into_iter().map(Arc::new).collect(), times })
    }
}

impl GeneratorSource for SnapshotPath {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn snapshot(&self, k: usize) -> Result<Arc<GeneratorSnapshot>> {
        Ok(self.snapshots[k].clone())
    }
}

/// Stored `zhat` configurations from which snapshots are built on demand.
pub struct ParticlePath {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub normalization: f64,
    pub topology: ShortRangeTopology,
    pub profile: ProfileSeries,
    pub profile_zero: ProfileSeries,
}

impl GeneratorSource for ParticlePath {
    fn times(&self) -> &[f64] {
        &self.times
    }
    fn snapshot(&self, k: usize) -> Result<Arc<GeneratorSnapshot>> {
        let n = self.topology.n as i64;
        let sys = ParticleSystem {
            positions: self.positions[k].clone(),
            time: self.times[k],
            index_offset: -n,
            stream: crate::rng::derive_stream(0, 0, crate::rng::Role::Brownian),
            normalization: self.normalization,
        };
        build_generator(&sys, &self.topology, &self.profile, &self.profile_zero).map(Arc::new)
    }
}

fn segment_index(times: &[f64], t: f64) -> usize {
    times.partition_point(|&x| x <= t).saturating_sub(1)
}

/// One factorised step `exp(hV/2) (I - hB)^{-1} exp(hV/2)` of a snapshot.
struct Step {
    h: f64,
    half: Vec<f64>,
    blocks: Vec<(usize, usize, Option<faer::linalg::solvers::Cholesky<f64>>)>,
}

impl Step {
    fn new(snap: &GeneratorSnapshot, h: f64) -> Self {
        let half = snap.potential.iter().map(|v| (0.5 * h * v).exp()).collect();
        let blocks = snap.components().into_iter().map(|(a, b)| (a, b, None)).collect();
        Self { h, half, blocks }
    }

    fn factor(snap: &GeneratorSnapshot, h: f64, a: usize, b: usize) -> Result<faer::linalg::solvers::Cholesky<f64>> {
        let m = b - a;
        let mut mat = Mat::<f64>::zeros(m, m);
        for k in a..b {
            let (lo, _) = snap.rows[k];
            let base = (lo - snap.offset) as usize;
            let mut diag = 1.0;
            for (q, w) in snap.weights[k].iter().enumerate() {
                let c = base + q;
                if c != k {
                    mat.write(k - a, c - a, -h * w);
                    diag += h * w;
                }
            }
            mat.write(k - a, k - a, diag);
        }
        mat.cholesky(Side::Lower)
            .map_err(|e| Error::LinearSolveFailure(format!("Cholesky of I - hB on block [{a}, {b}): {e:?}")))
    }

    fn apply(&mut self, snap: &GeneratorSnapshot, vs: &mut [Vec<f64>]) -> Result<()> {
        for v in vs.iter_mut() {
            for (x, f) in v.iter_mut().zip(&self.half) {
                *x *= f;
            }
        }
        for (a, b, chol) in self.blocks.iter_mut() {
            let (a, b) = (*a, *b);
            if vs.iter().all(|v| v[a..b].iter().all(|x| *x == 0.0)) {
                continue;
            }
            if b - a == 1 {
                continue;
            }
            if chol.is_none() {
                *chol = Some(Self::factor(snap, self.h, a, b)?);
            }
            let chol = chol.as_ref().expect("factorised");
            let mut rhs = Mat::<f64>::from_fn(b - a, vs.len(), |r, c| vs[c][a + r]);
            chol.solve_in_place(rhs.as_mut());
            for (c, v) in vs.iter_mut().enumerate() {
                for r in 0..b - a {
                    v[a + r] = rhs.read(r, c);
                }
            }
        }
        for v in vs.iter_mut() {
            for (x, f) in v.iter_mut().zip(&self.half) {
                *x *= f;
            }
        }
        Ok(())
    }
}

/// Advances every vector in `vs` from `s` to `t` under `dv/du = L(u) v`, with
/// `substeps` equal steps on each interval where the snapshot is fixed.
/// `observe` sees the vectors at the end of every such interval.
pub fn propagate_many<G, O>(path: &G, vs: &mut [Vec<f64>], s: f64, t: f64, substeps: usize, mut observe: O) -> Result<()>
where
    G: GeneratorSource + ?Sized,
    O: FnMut(f64, &[Vec<f64>]),
{
    if !(s <= t) {
        return Err(Error::Config(format!("propagation needs s <= t, got s = {s}, t = {t}")));
    }
    let times = path.times();
    let substeps = substeps.max(1);
    let mut u = s;
    while u < t {
        let k = segment_index(times, u);
        let end = times.get(k + 1).copied().filter(|&e| e < t).unwrap_or(t);
        let snap = path.snapshot(k)?;
        if let Some(v) = vs.iter().find(|v| v.len() != snap.len()) {
            return Err(Error::ShapeMismatch(format!("vector of length {} for a generator of size {}", v.len(), snap.len())));
        }
        let h = (end - u) / substeps as f64;
        let mut step = Step::new(&snap, h);
        for _ in 0..substeps {
            step.apply(&snap, vs)?;
        }
        u = end;
        observe(u, vs);
    }
    Ok(())
}

/// Substeps used by [`propagate_semigroup`] on each snapshot interval.
pub const DEFAULT_SUBSTEPS: usize = 2;

/// `U^L(s, t) w`.
pub fn propagate_semigroup<G: GeneratorSource + ?Sized>(path: &G, w: &[f64], s: f64, t: f64) -> Result<Vec<f64>> {
    let mut vs = vec![w.to_vec()];
    propagate_many(path, &mut vs, s, t, DEFAULT_SUBSTEPS, |_, _| {})?;
    Ok(vs.pop().expect("one vector"))
}

fn indicator(len: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    v[k] = 1.0;
    v
}

/// Propagator entries between labels `a` and `b` for start times `starts`
/// over `[s, s + horizon]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedReport {
    /// `max U_ab + U_ba` over every start and every observed time.
    pub max_sum: f64,
    pub max_ab: f64,
    pub max_ba: f64,
    /// `min over starts of U_ab(s, s + horizon)` and likewise for `ba`.
    pub min_ab_at_horizon: f64,
    pub min_ba_at_horizon: f64,
}

pub fn finite_speed_probe<G: GeneratorSource + ?Sized>(
    path: &G,
    a: i64,
    b: i64,
    starts: &[f64],
    horizon: f64,
    substeps: usize,
) -> Result<FiniteSpeedReport> {
    let snap = path.snapshot(0)?;
    let (len, off) = (snap.len(), snap.offset);
    let ka = usize::try_from(a - off).ok().filter(|&k| k < len).ok_or_else(|| Error::IndexOverflow(format!("label {a}")))?;
    let kb = usize::try_from(b - off).ok().filter(|&k| k < len).ok_or_else(|| Error::IndexOverflow(format!("label {b}")))?;
    let mut r = FiniteSpeedReport {
        max_sum: 0.0,
        max_ab: 0.0,
        max_ba: 0.0,
        min_ab_at_horizon: f64::INFINITY,
        min_ba_at_horizon: f64::INFINITY,
    };
    for &s in starts {
        // column b gives U_ab, column a gives U_ba
        let mut vs = vec![indicator(len, kb), indicator(len, ka)];
        let mut record = |vs: &[Vec<f64>]| {
            let (ab, ba) = (vs[0][ka], vs[1][kb]);
            r.max_ab = r.max_ab.max(ab);
            r.max_ba = r.max_ba.max(ba);
            r.max_sum = r.max_sum.max(ab + ba);
        };
        record(&vs);
        propagate_many(path, &mut vs, s, s + horizon, substeps, |_, v| record(v))?;
        r.min_ab_at_horizon = r.min_ab_at_horizon.min(vs[0][ka]);
        r.min_ba_at_horizon = r.min_ba_at_horizon.min(vs[1][kb]);
    }
    Ok(r)
}

/// `max (U_ab + U_ba)` over `a` in `near`, `b` in `far`, every start and every
/// observed time of `[s, s + horizon]`, together with the pair attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedScan {
    pub max_sum: f64,
    pub pair: (i64, i64),
}

pub fn finite_speed_scan<G: GeneratorSource + ?Sized>(
    path: &G,
    near: &[i64],
    far: &[i64],
    starts: &[f64],
    horizon: f64,
    substeps: usize,
) -> Result<FiniteSpeedScan> {
    let snap = path.snapshot(0)?;
    let (len, off) = (snap.len(), snap.offset);
    let slot = |l: i64| usize::try_from(l - off).ok().filter(|&k| k < len).ok_or_else(|| Error::IndexOverflow(format!("label {l}")));
    let ks_near = near.iter().map(|&l| slot(l)).collect::<Result<Vec<_>>>()?;
    let ks_far = far.iter().map(|&l| slot(l)).collect::<Result<Vec<_>>>()?;
    let mut best = FiniteSpeedScan { max_sum: 0.0, pair: (near.first().copied().unwrap_or(0), far.first().copied().unwrap_or(0)) };
    for &s in starts {
        // columns near first, then far
        let mut vs: Vec<Vec<f64>> = ks_near.iter().chain(&ks_far).map(|&k| indicator(len, k)).collect();
        let m = ks_near.len();
        let mut record = |vs: &[Vec<f64>]| {
            for (p, &ka) in ks_near.iter().enumerate() {
                for (q, &kb) in ks_far.iter().enumerate() {
                    let sum = vs[m + q][ka] + vs[p][kb];
                    if sum > best.max_sum {
                        best = FiniteSpeedScan { max_sum: sum, pair: (near[p], far[q]) };
                    }
                }
            }
        };
        record(&vs);
        propagate_many(path, &mut vs, s, s + horizon, substeps, |_, v| record(v))?;
    }
    Ok(best)
}

pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// `||U^L(0, t) w||_inf / ||w||_p` at each of the increasing `times`.
pub fn energy_decay_curve<G: GeneratorSource + ?Sized>(path: &G, w: &[f64], p: f64, times: &[f64], substeps: usize) -> Result<Vec<f64>> {
    let norm = lp_norm(w, p);
    if norm == 0.0 {
        return Err(Error::Config("energy probe needs a nonzero vector".into()));
    }
    let start = path.times()[0];
    let mut vs = vec![w.to_vec()];
    let mut u = start;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        propagate_many(path, &mut vs, u, t, substeps, |_, _| {})?;
        u = t;
        out.push(lp_norm(&vs[0], f64::INFINITY) / norm);
    }
    Ok(out)
}

/// `||U^L(0, t) w||_inf / ||w||_p` from the start of the path.
pub fn energy_decay_probe<G: GeneratorSource + ?Sized>(path: &G, w: &[f64], p: f64, t: f64) -> Result<f64> {
    Ok(energy_decay_curve(path, w, p, &[t], DEFAULT_SUBSTEPS)?[0])
}

/// `sup ||U^L(0, t) w||_inf / ||w||_p` over `w` supported on the labels
/// `support`, i.e. the largest dual `l^q` norm (`1/p + 1/q = 1`) of a row of
/// `U` restricted to the support columns, at each of the increasing `times`.
pub fn energy_decay_sup<G: GeneratorSource + ?Sized>(
    path: &G,
    support: std::ops::RangeInclusive<i64>,
    p: f64,
    times: &[f64],
    substeps: usize,
) -> Result<Vec<f64>> {
    if !(p >= 1.0) {
        return Err(Error::Config(format!("energy probe needs p >= 1, got {p}")));
    }
    let q = if p == 1.0 { f64::INFINITY } else { p / (p - 1.0) };
    let snap = path.snapshot(0)?;
    let (len, off) = (snap.len(), snap.offset);
    let mut vs: Vec<Vec<f64>> = support
        .map(|j| usize::try_from(j - off).ok().filter(|&k| k < len).map(|k| indicator(len, k)))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::IndexOverflow("energy probe support outside the window".into()))?;
    let mut u = path.times()[0];
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        propagate_many(path, &mut vs, u, t, substeps, |_, _| {})?;
        u = t;
        let mut row = vec![0.0; vs.len()];
        let mut sup = 0.0f64;
        for i in 0..len {
            for (r, v) in row.iter_mut().zip(&vs) {
                *r = v[i];
            }
            sup = sup.max(lp_norm(&row, q));
        }
        out.push(sup);
    }
    Ok(out)
}

/// `sum_i u_i(t) / sum_i u_i(s)` for nonnegative `u`.
pub fn mass_ratio<G: GeneratorSource + ?Sized>(path: &G, u: &[f64], s: f64, t: f64) -> Result<f64> {
    let before: f64 = u.iter().sum();
    let after: f64 = propagate_semigroup(path, u, s, t)?.iter().sum();
    Ok(after / before)
}

/// Least-squares slope and intercept of `ln y` against `ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}
