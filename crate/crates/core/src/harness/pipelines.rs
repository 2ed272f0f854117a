//! Typed pipelines behind each experiment. Trials run on a rayon pool and
//! are collected in trial order, so results do not depend on scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, Route, RunConfig};
use crate::dbm::coupling::{coupled_edge_run, reference_generator_path, LambdaEdge, ReferencePathOptions};
use crate::dbm::generator::{
    energy_decay_sup, finite_speed_probe, finite_speed_scan, lp_norm, loglog_fit, propagate_many, FiniteSpeedScan, GeneratorSource,
    SnapshotPath,
};
use crate::dbm::topology::short_range_topology;
use crate::dbm::{ensemble_eigenvalues, goe_smallest_eigenvalues, sde_evolve, ParticleSystem};
use crate::error::{Error, Result};
use crate::free_conv::{quantiles_with, DensityTable, FreeConvolutionProfile};
use crate::measure::{check_eta_regular_with, InitialData, RegularityReport};
use crate::rng::{derive_stream, Role};
use crate::stats::samples::rescale;
use crate::stats::{
    default_test_functions, empirical_quantile, local_law_report, median, rigidity_report, two_sample_compare, ComparisonReport,
    CompareTolerances, EdgeSampleSet, LocalLawGrid, LocalLawReport, RigidityReport, SampleMeta,
};

/// Trial index reserved for bootstrap resampling streams.
const BOOTSTRAP_TRIAL: u64 = (1 << 56) - 1;
const BOOTSTRAP_RESAMPLES: usize = 200;

/// Runs `f(trial)` for `trial = 0..count` on `workers` threads, in trial order.
pub fn par_trials<T, F>(workers: usize, count: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| (0..count as u64).into_par_iter().map(&f).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    AtMost,
    AtLeast,
    Above,
}

/// A named threshold check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, threshold: f64) -> Self {
        let pass = match relation {
            Relation::AtMost => value <= threshold,
            Relation::AtLeast => value >= threshold,
            Relation::Above => value > threshold,
        };
        Self { name: name.into(), value, relation, threshold, pass }
    }

    /// A check without a numeric threshold.
    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, Relation::AtLeast, 1.0)
    }
}

fn initial(cfg: &RunConfig) -> Result<InitialData> {
    cfg.initial.build(cfg.n)
}

fn meta(cfg: &RunConfig, v: &InitialData, t: f64, gamma0: f64, e_minus: f64, i0: usize) -> SampleMeta {
    SampleMeta { n: cfg.n, t, v_fingerprint: v.fingerprint(), gamma0, e_minus, i0, master_seed: cfg.master_seed }
}

/// Spectrum of `V + sqrt(t) G` for one trial along the configured route.
fn spectrum(cfg: &RunConfig, v: &InitialData, t: f64, trial: u64) -> Result<Vec<f64>> {
    match cfg.route {
        Route::Matrix => ensemble_eigenvalues(v, t, &derive_stream(cfg.master_seed, trial, Role::Matrix)),
        Route::Sde => {
            let sys = ParticleSystem::new(v.values().to_vec(), 1, derive_stream(cfg.master_seed, trial, Role::Brownian), v.len() as f64)?;
            Ok(sde_evolve(&sys, t, cfg.dt_max, None)?.positions)
        }
    }
}

fn spectra(cfg: &RunConfig, v: &InitialData, t: f64) -> Result<Vec<Vec<f64>>> {
    par_trials(cfg.workers, cfg.trials, |trial| spectrum(cfg, v, t, trial))
}

// ---------------------------------------------------------------- edge-law

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLawRow {
    pub t: f64,
    pub xi_minus: f64,
    pub e_minus: f64,
    pub gamma0: f64,
    pub mass_below: f64,
    pub anchor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeLawResult {
    pub n: usize,
    pub v_fingerprint: String,
    pub rows: Vec<EdgeLawRow>,
    /// `rho_fc,t` at the first time.
    pub density: DensityTable,
    /// Trapezoid mass of `density`.
    pub density_mass: f64,
}

pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(a, b)| 0.5 * (a[1] - a[0]) * (b[0] + b[1])).sum()
}

pub fn edge_law(cfg: &RunConfig) -> Result<EdgeLawResult> {
    let v = initial(cfg)?;
    let mut times: Vec<f64> = cfg.time().ok().into_iter().collect();
    times.extend(&cfg.t_sweep);
    if times.is_empty() {
        return Err(Error::Config("edge-law needs t, t_factor or t_sweep".into()));
    }
    let mut rows = Vec::with_capacity(times.len());
    let mut density = None;
    for &t in &times {
        let p = FreeConvolutionProfile::compute(&v, t)?;
        if density.is_none() {
            density = Some(DensityTable::sample(&v, &p, 2000)?);
        }
        rows.push(EdgeLawRow { t, xi_minus: p.xi_minus, e_minus: p.e_minus, gamma0: p.gamma0, mass_below: p.mass_below, anchor: p.anchor });
    }
    let density = density.expect("at least one time");
    let density_mass = trapezoid(&density.e, &density.rho);
    Ok(EdgeLawResult { n: cfg.n, v_fingerprint: v.fingerprint(), rows, density, density_mass })
}

impl EdgeLawResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let finite = self.rows.iter().all(|r| r.e_minus.is_finite() && r.xi_minus.is_finite() && r.gamma0 > 0.0);
        vec![Verdict::flag("edge_finite", finite), Verdict::new("density_mass_error", (self.density_mass - 1.0).abs(), Relation::AtMost, 0.02)]
    }
}

// ---------------------------------------------------------------- regularity

pub fn regularity(cfg: &RunConfig) -> Result<RegularityReport> {
    let v = initial(cfg)?;
    Ok(check_eta_regular_with(&v, cfg.eta_star(), cfg.grid_density, cfg.regularity_constant))
}

pub fn regularity_verdicts(r: &RegularityReport) -> Vec<Verdict> {
    vec![
        Verdict::new("regularity_constant", r.constant_found, Relation::AtMost, r.max_constant),
        Verdict::flag("gap", r.gap_ok),
        Verdict::flag("norm", r.norm_ok),
    ]
}

// ---------------------------------------------------------------- simulate

/// Rescaled edge statistics of `V + sqrt(t) G` over `cfg.trials` trials.
pub fn simulate(cfg: &RunConfig) -> Result<EdgeSampleSet> {
    let v = initial(cfg)?;
    sample_edge_set(cfg, &v, cfg.time()?)
}

fn sample_edge_set(cfg: &RunConfig, v: &InitialData, t: f64) -> Result<EdgeSampleSet> {
    let p = FreeConvolutionProfile::compute(v, t)?;
    let i0 = p.anchor + 1;
    let rows = par_trials(cfg.workers, cfg.trials, |trial| rescale(&spectrum(cfg, v, t, trial)?, p.gamma0, p.e_minus, i0, cfg.k))?;
    EdgeSampleSet::new(rows, meta(cfg, v, t, p.gamma0, p.e_minus, i0))
}

/// `N^{2/3} (mu_{1+j} + 2)`, `j = 0..=k`, for GOE samples (`gamma_0 = 1`, `E_- = -2`).
pub fn goe_baseline(n: usize, k: usize, trials: usize, master_seed: u64, workers: usize) -> Result<EdgeSampleSet> {
    if k + 1 > n {
        return Err(Error::IndexOverflow(format!("k + 1 = {} exceeds N = {n}", k + 1)));
    }
    let scale = (n as f64).powf(2.0 / 3.0);
    let rows = par_trials(workers, trials, |trial| {
        let mu = goe_smallest_eigenvalues(n, k + 1, &derive_stream(master_seed, trial, Role::Baseline));
        Ok(mu.iter().map(|x| scale * (x + 2.0)).collect())
    })?;
    let meta = SampleMeta { n, t: 0.0, v_fingerprint: "goe".into(), gamma0: 1.0, e_minus: -2.0, i0: 1, master_seed };
    EdgeSampleSet::new(rows, meta)
}

// ---------------------------------------------------------------- universality

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub t: f64,
    pub ks0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityResult {
    pub t: f64,
    pub eta_star: f64,
    pub report: ComparisonReport,
    pub control_t: Option<f64>,
    pub control: Option<ComparisonReport>,
    pub sweep: Vec<SweepPoint>,
}

pub struct UniversalityRun {
    pub result: UniversalityResult,
    pub a: EdgeSampleSet,
    pub b: EdgeSampleSet,
}

pub fn universality(cfg: &RunConfig) -> Result<UniversalityRun> {
    let v = initial(cfg)?;
    let t = cfg.time()?;
    let tol = CompareTolerances { ks: cfg.ks_tol, gap: cfg.gap_tol, se: cfg.se_tol };
    let fs = default_test_functions(cfg.k + 1);
    let a = sample_edge_set(cfg, &v, t)?;
    let b = goe_baseline(cfg.n, cfg.k, cfg.baseline_trials(), cfg.master_seed, cfg.workers)?;
    let report = two_sample_compare(&a, &b, &fs, &tol)?;
    let root = cfg.eta_star().sqrt();
    let control_t = cfg.control_factor.map(|c| c * root);
    let control = match control_t {
        Some(tc) => Some(two_sample_compare(&sample_edge_set(cfg, &v, tc)?, &b, &fs, &tol)?),
        None => None,
    };
    let mut sweep = Vec::with_capacity(cfg.t_sweep.len());
    for &ts in &cfg.t_sweep {
        let s = sample_edge_set(cfg, &v, ts)?;
        sweep.push(SweepPoint { t: ts, ks0: two_sample_compare(&s, &b, &fs, &tol)?.ks[0] });
    }
    Ok(UniversalityRun { result: UniversalityResult { t, eta_star: cfg.eta_star(), report, control_t, control, sweep }, a, b })
}

impl UniversalityResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let r = &self.report;
        let mut out: Vec<Verdict> = r.ks.iter().enumerate().map(|(j, &d)| Verdict::new(format!("ks[{j}]"), d, Relation::AtMost, r.tolerances.ks)).collect();
        for (name, g) in &r.fgaps {
            out.push(Verdict::new(format!("gap {name}"), g.gap, Relation::AtMost, r.tolerances.gap));
            out.push(Verdict::new(format!("se {name}"), g.se, Relation::AtMost, r.tolerances.se));
        }
        if let Some(c) = &self.control {
            // the control must separate from GOE by more than the tolerance and the main run
            out.push(Verdict::new("control ks[0]", c.ks[0], Relation::Above, r.tolerances.ks.max(r.ks[0])));
        }
        out
    }
}

// ---------------------------------------------------------------- couple

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoupleResult {
    pub n: usize,
    pub t0: f64,
    pub t1: f64,
    pub gamma0: f64,
    pub i0: usize,
    pub times: Vec<f64>,
    /// Per trial, `|(lambda_{i_0} - E_lambda) - (mu_1 - E_mu)|` at each time.
    pub per_trial: Vec<Vec<f64>>,
    pub medians: Vec<f64>,
    /// Position of `t_1` in `times`.
    pub t1_index: usize,
    pub ratio: f64,
    pub contraction_ratio: f64,
}

pub fn couple(cfg: &RunConfig) -> Result<CoupleResult> {
    let v = initial(cfg)?;
    let e = cfg.exponents();
    e.validate()?;
    let n = cfg.n;
    let (t0, t1) = (e.t0(n), e.t1(n));
    let edge = LambdaEdge::new(&v, t0)?;
    let dt = t1 / cfg.couple_steps as f64;
    let total = (cfg.couple_horizon * cfg.couple_steps as f64).round().max(1.0) as u64;
    let stride = (cfg.couple_steps / 8).max(1);
    let mut steps: Vec<u64> = (0..=total).step_by(stride as usize).collect();
    for s in [cfg.couple_steps.min(total), total] {
        if !steps.contains(&s) {
            steps.push(s);
        }
    }
    steps.sort_unstable();
    let e_lambda = steps.iter().map(|&s| edge.e_lambda(&v, s as f64 * dt)).collect::<Result<Vec<_>>>()?;
    let per_trial = par_trials(cfg.workers, cfg.trials, |trial| {
        let trace = coupled_edge_run(&v, &edge, &e_lambda, &steps, dt, 1, cfg.master_seed, trial)?;
        Ok(trace.differences.iter().map(|d| d[0].abs()).collect::<Vec<f64>>())
    })?;
    let times: Vec<f64> = steps.iter().map(|&s| s as f64 * dt).collect();
    let medians: Vec<f64> = (0..steps.len()).map(|q| median(&per_trial.iter().map(|r| r[q]).collect::<Vec<_>>())).collect();
    let t1_index = steps.iter().position(|&s| s == cfg.couple_steps.min(total)).expect("t_1 recorded");
    let ratio = medians[t1_index] / medians[0];
    Ok(CoupleResult { n, t0, t1, gamma0: edge.gamma0, i0: edge.i0, times, per_trial, medians, t1_index, ratio, contraction_ratio: cfg.contraction_ratio })
}

impl CoupleResult {
    pub fn largest_increase(&self) -> f64 {
        self.medians[..=self.t1_index].windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        vec![
            Verdict::new("median ratio t1/0", self.ratio, Relation::AtMost, self.contraction_ratio),
            Verdict::new("median at t1", self.medians[self.t1_index], Relation::AtMost, (self.n as f64).powf(-2.0 / 3.0)),
            Verdict::new("largest median increase on [0, t1]", self.largest_increase(), Relation::AtMost, 0.0),
        ]
    }
}

// ---------------------------------------------------------------- rigidity

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidityResult {
    pub t: f64,
    pub quantiles: Vec<f64>,
    pub report: RigidityReport,
    pub level: f64,
}

pub fn rigidity(cfg: &RunConfig) -> Result<RigidityResult> {
    let v = initial(cfg)?;
    let t = cfg.time()?;
    let p = FreeConvolutionProfile::compute(&v, t)?;
    let count = ((cfg.rigidity_fraction * cfg.n as f64).floor() as usize).max(1);
    let indices: Vec<usize> = (1..=count).collect();
    let quantiles = quantiles_with(v.values(), &p, &indices)?;
    let spectra = spectra(cfg, &v, t)?;
    let envelope = cfg.rigidity_constant * (cfg.n as f64).ln();
    let report = rigidity_report(&spectra, &quantiles, p.anchor + 1, envelope);
    Ok(RigidityResult { t, quantiles, report, level: cfg.rigidity_level })
}

impl RigidityResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        vec![Verdict::new("fraction below envelope", self.report.fraction_below, Relation::AtLeast, self.level)]
    }
}

// ---------------------------------------------------------------- local-law

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalLawResult {
    pub report: LocalLawReport,
    /// `local_law_constant * log N`.
    pub bound: f64,
}

pub fn local_law(cfg: &RunConfig) -> Result<LocalLawResult> {
    let v = initial(cfg)?;
    let t = cfg.time()?;
    let grid = LocalLawGrid {
        sigma: cfg.sigma,
        right_extent: cfg.ll_right_extent,
        left_extent: cfg.ll_left_extent,
        eta_max: cfg.ll_eta_max,
        e_points: cfg.ll_e_points,
        eta_points: cfg.ll_eta_points,
        edge_shift: cfg.ll_edge_shift,
    };
    let spectra = spectra(cfg, &v, t)?;
    let report = local_law_report(&v, t, &spectra, &grid, cfg.local_law_level)?;
    Ok(LocalLawResult { report, bound: cfg.local_law_constant * (cfg.n as f64).ln() })
}

impl LocalLawResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        vec![
            Verdict::new("right-domain quantile", self.report.right.quantile, Relation::AtMost, self.bound),
            Verdict::new("left-domain quantile", self.report.left.quantile, Relation::AtMost, self.bound),
        ]
    }
}

// ---------------------------------------------------------------- probe-finite-speed

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedTrial {
    pub scan: FiniteSpeedScan,
    /// `(a, min(U_{a,a+1}, U_{a+1,a}))` at lag `t_1`, minimised over starts.
    pub adjacent: Vec<(i64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedResult {
    pub n: usize,
    pub t1: f64,
    /// Near labels `a <= N^{3 omega_ell + delta}/2`.
    pub near: Vec<i64>,
    /// Far labels `b >= N^{3 omega_ell + delta + epsilon}`.
    pub far: Vec<i64>,
    pub starts: Vec<f64>,
    pub trials: Vec<FiniteSpeedTrial>,
    pub max_cross: f64,
    pub min_adjacent: f64,
    pub cross_max: f64,
    pub adjacent_min: f64,
}

fn dedup_sorted(mut v: Vec<i64>) -> Vec<i64> {
    v.sort_unstable();
    v.dedup();
    v
}

/// Near and far label sets across the barrier.
pub fn barrier_labels(n: usize, omega_ell: f64, delta: f64, epsilon: f64) -> Result<(Vec<i64>, Vec<i64>)> {
    let nf = n as f64;
    let a_max = (0.5 * nf.powf(3.0 * omega_ell + delta)).floor() as i64;
    let b_min = nf.powf(3.0 * omega_ell + delta + epsilon).ceil() as i64;
    let ni = n as i64;
    if a_max < 1 || b_min > ni || b_min <= a_max + 1 {
        return Err(Error::Config(format!("barrier a <= {a_max}, b >= {b_min} does not fit N = {n}")));
    }
    Ok((dedup_sorted(vec![1, (a_max / 2).max(1), a_max]), dedup_sorted(vec![b_min, (b_min + ni) / 2, ni])))
}

pub fn probe_finite_speed(cfg: &RunConfig) -> Result<FiniteSpeedResult> {
    let e = cfg.exponents();
    let n = cfg.n;
    let t1 = e.t1(n);
    let topo = short_range_topology(n, e.omega_ell, e.omega_a, n / 2, &e)?;
    let (near, far) = barrier_labels(n, e.omega_ell, cfg.delta, cfg.epsilon)?;
    let intervals = 2 * cfg.snapshots_per_t1;
    let times: Vec<f64> = (0..=intervals).map(|q| 2.0 * t1 * q as f64 / intervals as f64).collect();
    let starts = vec![0.0, 0.5 * t1, t1];
    let opts = ReferencePathOptions { c_v: cfg.c_v, ..Default::default() };
    let adjacent_labels = dedup_sorted(vec![near[0], *near.last().expect("non-empty")]);
    let trials = par_trials(cfg.workers, cfg.trials, |trial| {
        let path = reference_generator_path(&topo, &times, &opts, cfg.master_seed, trial)?;
        let scan = finite_speed_scan(&path, &near, &far, &starts, t1, cfg.substeps)?;
        let adjacent = adjacent_labels
            .iter()
            .map(|&a| {
                let r = finite_speed_probe(&path, a, a + 1, &starts, t1, cfg.substeps)?;
                Ok((a, r.min_ab_at_horizon.min(r.min_ba_at_horizon)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FiniteSpeedTrial { scan, adjacent })
    })?;
    let max_cross = trials.iter().map(|t| t.scan.max_sum).fold(0.0, f64::max);
    let min_adjacent = trials.iter().flat_map(|t| t.adjacent.iter().map(|a| a.1)).fold(f64::INFINITY, f64::min);
    Ok(FiniteSpeedResult {
        n,
        t1,
        near,
        far,
        starts,
        trials,
        max_cross,
        min_adjacent,
        cross_max: cfg.fs_cross_max,
        adjacent_min: cfg.fs_adjacent_min,
    })
}

impl FiniteSpeedResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        vec![
            Verdict::new("max U_ab + U_ba across barrier", self.max_cross, Relation::AtMost, self.cross_max),
            Verdict::new("min adjacent entry at lag t1", self.min_adjacent, Relation::AtLeast, self.adjacent_min),
        ]
    }
}

// ---------------------------------------------------------------- probe-energy

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupCheck {
    pub time: f64,
    /// Largest `||U w|| / ||w||` over the horizon for a signed Gaussian `w`.
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    /// Smallest entry of `U u` for the nonnegative inputs.
    pub min_entry: f64,
    /// Smallest `sum U u / sum u` for a dense uniform `u`.
    pub random_mass: f64,
    /// Smallest column sum of `U` over the core labels.
    pub column_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemigroupSummary {
    pub n: usize,
    pub t1: f64,
    /// Propagation horizon `10 t_1`.
    pub horizon: f64,
    pub checks: Vec<SemigroupCheck>,
    pub max_ratio: f64,
    pub min_entry: f64,
    pub min_random_mass: f64,
    pub min_column_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyResult {
    pub n: usize,
    pub t1: f64,
    pub p: f64,
    /// Labels `1..=support` carry the test vectors.
    pub support: i64,
    pub times: Vec<f64>,
    /// Per trial, the sup ratio at each of `times`.
    pub curves: Vec<Vec<f64>>,
    pub mean_curve: Vec<f64>,
    /// Fit window `[lo, hi]` in absolute time.
    pub window: (f64, f64),
    pub slope: f64,
    pub intercept: f64,
    /// Bootstrap 95% interval over trials.
    pub slope_ci: (f64, f64),
    /// Slope over `[t_1/8, t_1]`, for comparison.
    pub short_window_slope: f64,
    /// `-3 (1 - 6 eta) / p + slack`.
    pub bound: f64,
    pub semigroup: Option<SemigroupSummary>,
}

fn geometric(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    (0..points).map(|q| lo * (hi / lo).powf(q as f64 / (points - 1).max(1) as f64)).collect()
}

fn fit_on(times: &[f64], curve: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let (x, y): (Vec<f64>, Vec<f64>) = times.iter().zip(curve).filter(|(t, _)| **t >= lo * (1.0 - 1e-12) && **t <= hi * (1.0 + 1e-12)).map(|(t, c)| (*t, *c)).unzip();
    loglog_fit(&x, &y)
}

fn mean_of(curves: &[&Vec<f64>]) -> Vec<f64> {
    let m = curves.len() as f64;
    (0..curves[0].len()).map(|q| curves.iter().map(|c| c[q]).sum::<f64>() / m).collect()
}

pub fn probe_energy(cfg: &RunConfig) -> Result<EnergyResult> {
    let e = cfg.exponents();
    let n = cfg.n;
    let nf = n as f64;
    let t1 = e.t1(n);
    let topo = short_range_topology(n, e.omega_ell, e.omega_a, n / 2, &e)?;
    let support = ((topo.ell as f64).powi(3) * nf.powf(cfg.delta)).floor().clamp(1.0, nf) as i64;
    let lo = cfg.energy_t_min.unwrap_or(nf.powf(-1.0 / 3.0) / t1) * t1;
    let hi = cfg.energy_t_max * t1;
    if !(lo < hi) {
        return Err(Error::Config(format!("energy window [{lo}, {hi}] is empty")));
    }
    let mut times = geometric(lo, hi, cfg.energy_points);
    times.extend(geometric(t1 / 8.0, t1, 5));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let end = *times.last().expect("non-empty");
    let intervals = (cfg.snapshots_per_t1 as f64 * end / t1).ceil().max(1.0) as usize;
    let path_times: Vec<f64> = (0..=intervals).map(|q| end * q as f64 / intervals as f64).collect();
    let opts = ReferencePathOptions { c_v: cfg.c_v, ..Default::default() };
    let curves = par_trials(cfg.workers, cfg.trials, |trial| {
        let path = reference_generator_path(&topo, &path_times, &opts, cfg.master_seed, trial)?;
        energy_decay_sup(&path, 1..=support, cfg.energy_p, &times, cfg.substeps)
    })?;
    let all: Vec<&Vec<f64>> = curves.iter().collect();
    let mean_curve = mean_of(&all);
    let (slope, intercept) = fit_on(&times, &mean_curve, lo, hi);
    let short_window_slope = fit_on(&times, &mean_curve, t1 / 8.0, t1).0;
    let mut rng = derive_stream(cfg.master_seed, BOOTSTRAP_TRIAL, Role::Auxiliary).rng();
    let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            let pick: Vec<&Vec<f64>> = (0..curves.len()).map(|_| &curves[rng.gen_range(0..curves.len())]).collect();
            fit_on(&times, &mean_of(&pick), lo, hi).0
        })
        .collect();
    boot.sort_by(f64::total_cmp);
    let slope_ci = (empirical_quantile(&boot, 0.025), empirical_quantile(&boot, 0.975));
    let bound = -3.0 * (1.0 - 6.0 * cfg.energy_eta) / cfg.energy_p + cfg.energy_slack;
    let semigroup = if cfg.semigroup_snapshots > 0 { Some(semigroup_checks(cfg)?) } else { None };
    Ok(EnergyResult {
        n,
        t1,
        p: cfg.energy_p,
        support,
        times,
        curves,
        mean_curve,
        window: (lo, hi),
        slope,
        intercept,
        slope_ci,
        short_window_slope,
        bound,
        semigroup,
    })
}

const SNAPSHOTS_PER_PATH: usize = 5;
/// First trial index of the semigroup-check paths, clear of the main trials.
const SEMIGROUP_TRIAL_BASE: u64 = 1 << 40;
const HORIZON_T1: f64 = 10.0;

/// Contraction, positivity and mass checks on frozen generator snapshots
/// taken from reference paths at `N = semigroup_n`, each propagated over
/// `[tau, tau + 10 t_1]`.
pub fn semigroup_checks(cfg: &RunConfig) -> Result<SemigroupSummary> {
    let e = cfg.exponents();
    let n = cfg.semigroup_n;
    let t1 = e.t1(n);
    let horizon = HORIZON_T1 * t1;
    let topo = short_range_topology(n, e.omega_ell, e.omega_a, n / 2, &e)?;
    let paths = cfg.semigroup_snapshots.div_ceil(SNAPSHOTS_PER_PATH);
    let times: Vec<f64> = (0..SNAPSHOTS_PER_PATH).map(|q| horizon * q as f64 / (SNAPSHOTS_PER_PATH - 1) as f64).collect();
    let opts = ReferencePathOptions { c_v: cfg.c_v, ..Default::default() };
    let per_path = par_trials(cfg.workers, paths, |trial| {
        let path = reference_generator_path(&topo, &times, &opts, cfg.master_seed, SEMIGROUP_TRIAL_BASE + trial)?;
        let wanted = (cfg.semigroup_snapshots - trial as usize * SNAPSHOTS_PER_PATH).min(SNAPSHOTS_PER_PATH);
        (0..wanted)
            .map(|k| {
                let snap = (*path.snapshot(k)?).clone();
                let q = trial * SNAPSHOTS_PER_PATH as u64 + k as u64;
                check_snapshot(snap, n, horizon, cfg.substeps, cfg.master_seed, q)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let checks: Vec<SemigroupCheck> = per_path.into_iter().flatten().collect();
    let max_ratio = checks.iter().map(|c| c.l1.max(c.l2).max(c.linf)).fold(0.0, f64::max);
    let min_entry = checks.iter().map(|c| c.min_entry).fold(f64::INFINITY, f64::min);
    let min_random_mass = checks.iter().map(|c| c.random_mass).fold(f64::INFINITY, f64::min);
    let min_column_mass = checks.iter().map(|c| c.column_mass).fold(f64::INFINITY, f64::min);
    Ok(SemigroupSummary { n, t1, horizon, checks, max_ratio, min_entry, min_random_mass, min_column_mass })
}

fn check_snapshot(
    snap: crate::dbm::generator::GeneratorSnapshot,
    n: usize,
    horizon: f64,
    substeps: usize,
    master_seed: u64,
    q: u64,
) -> Result<SemigroupCheck> {
    let len = snap.len();
    let core = (1 - snap.offset) as usize..(n as i64 + 1 - snap.offset) as usize;
    let tau = snap.time;
    let frozen = SnapshotPath::new(vec![snap])?;
    let mut rng = derive_stream(master_seed, q, Role::Auxiliary).rng();
    let w: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let mut u = vec![0.0; len];
    for x in &mut u[core.clone()] {
        *x = rng.gen::<f64>();
    }
    let norms = [1.0, 2.0, f64::INFINITY].map(|p| lp_norm(&w, p));
    let u_mass: f64 = u.iter().sum();
    // a frozen step exp(hV/2) (I - hB)^{-1} exp(hV/2) is symmetric, so the
    // column sums of U are U applied to the all-ones core vector
    let mut ones = vec![0.0; len];
    ones[core.clone()].fill(1.0);
    let mut vs = vec![w, u, ones];
    for k in [core.start, core.start + 1, core.start + n / 2, core.end - 1] {
        let mut e = vec![0.0; len];
        e[k] = 1.0;
        vs.push(e);
    }
    let mut c = SemigroupCheck { time: tau, l1: 0.0, l2: 0.0, linf: 0.0, min_entry: f64::INFINITY, random_mass: f64::INFINITY, column_mass: f64::INFINITY };
    let chunks = HORIZON_T1 as usize;
    let mut s = tau;
    for m in 1..=chunks {
        let t = tau + horizon * m as f64 / chunks as f64;
        propagate_many(&frozen, &mut vs, s, t, substeps, |_, _| {})?;
        s = t;
        c.l1 = c.l1.max(lp_norm(&vs[0], 1.0) / norms[0]);
        c.l2 = c.l2.max(lp_norm(&vs[0], 2.0) / norms[1]);
        c.linf = c.linf.max(lp_norm(&vs[0], f64::INFINITY) / norms[2]);
        c.min_entry = vs[1..].iter().flat_map(|v| v.iter().copied()).fold(c.min_entry, f64::min);
        c.random_mass = c.random_mass.min(vs[1].iter().sum::<f64>() / u_mass);
        c.column_mass = vs[2][core.clone()].iter().copied().fold(c.column_mass, f64::min);
    }
    Ok(c)
}

impl EnergyResult {
    pub fn verdicts(&self) -> Vec<Verdict> {
        let mut out = vec![Verdict::new("decay slope", self.slope, Relation::AtMost, self.bound)];
        if let Some(s) = &self.semigroup {
            out.push(Verdict::new("max contraction ratio", s.max_ratio, Relation::AtMost, 1.0 + 1e-12));
            out.push(Verdict::new("min entry of nonnegative input", s.min_entry, Relation::AtLeast, 0.0));
            out.push(Verdict::new("min mass ratio (uniform u)", s.min_random_mass, Relation::AtLeast, 0.5));
        }
        out
    }
}

/// Trials `first..first + count` of one stream role.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRange {
    pub role: Role,
    pub first: u64,
    pub count: usize,
}

/// Streams drawn by the configured pipeline; every trial's noise is
/// `derive_stream(master_seed, trial, role)`.
pub fn stream_ranges(cfg: &RunConfig) -> Vec<StreamRange> {
    let r = |role, first, count| StreamRange { role, first, count };
    let main = match cfg.route {
        Route::Matrix => Role::Matrix,
        Route::Sde => Role::Brownian,
    };
    match cfg.experiment {
        Experiment::EdgeLaw | Experiment::Regularity => Vec::new(),
        Experiment::Simulate | Experiment::Rigidity | Experiment::LocalLaw => vec![r(main, 0, cfg.trials)],
        Experiment::Universality => vec![r(main, 0, cfg.trials), r(Role::Baseline, 0, cfg.baseline_trials())],
        Experiment::Couple => vec![r(Role::Matrix, 0, cfg.trials), r(Role::Initial, 0, cfg.trials), r(Role::Brownian, 0, cfg.trials)],
        Experiment::ProbeFiniteSpeed => vec![r(Role::Increment, 0, cfg.trials)],
        Experiment::ProbeEnergy => {
            let mut out = vec![r(Role::Increment, 0, cfg.trials)];
            if cfg.semigroup_snapshots > 0 {
                out.push(r(Role::Increment, SEMIGROUP_TRIAL_BASE, cfg.semigroup_snapshots.div_ceil(SNAPSHOTS_PER_PATH)));
                out.push(r(Role::Auxiliary, 0, cfg.semigroup_snapshots));
            }
            out.push(r(Role::Auxiliary, BOOTSTRAP_TRIAL, 1));
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_relations() {
        assert!(Verdict::new("a", 1.0, Relation::AtMost, 1.0).pass);
        assert!(!Verdict::new("a", 1.0, Relation::Above, 1.0).pass);
        assert!(Verdict::new("a", 1.0, Relation::AtLeast, 1.0).pass);
        assert!(!Verdict::new("a", f64::NAN, Relation::AtMost, 1.0).pass);
    }

    #[test]
    fn parallel_trials_keep_order() {
        let serial = par_trials(1, 37, |t| Ok(t * t)).unwrap();
        let parallel = par_trials(4, 37, |t| Ok(t * t)).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial[6], 36);
        assert!(par_trials(2, 5, |t| if t == 3 { Err(Error::Config("x".into())) } else { Ok(t) }).is_err());
    }

    #[test]
    fn trapezoid_of_linear_function() {
        assert!((trapezoid(&[0.0, 0.5, 2.0], &[0.0, 0.5, 2.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn barrier_at_desk_scale() {
        // N = 2000: N^{0.5}/2 = 22.36, N^{0.95} = 1367.66
        let (near, far) = barrier_labels(2000, 0.15, 0.05, 0.45).unwrap();
        assert_eq!(near, vec![1, 11, 22]);
        assert_eq!(far, vec![1368, 1684, 2000]);
        assert!(barrier_labels(100, 0.15, 0.05, 0.45).is_ok());
        assert!(barrier_labels(10, 0.3, 0.05, 0.45).is_err());
    }

    #[test]
    fn goe_baseline_is_rescaled_and_ordered() {
        let b = goe_baseline(50, 2, 6, 3, 1).unwrap();
        assert_eq!((b.trials(), b.width()), (6, 3));
        let mu = goe_smallest_eigenvalues(50, 3, &derive_stream(3, 4, Role::Baseline));
        assert!((b.samples[4][1] - 50f64.powf(2.0 / 3.0) * (mu[1] + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn column_mass_matches_explicit_columns() {
        use crate::dbm::generator::GeneratorSnapshot;
        let n = 6usize;
        let pos: Vec<f64> = (0..2 * n + 1).map(|k| k as f64 * 0.7 + 0.01 * (k * k) as f64).collect();
        let rows: Vec<(i64, i64)> = (0..2 * n as i64 + 1).map(|k| if k <= n as i64 { (-(n as i64), 0) } else { (1, n as i64) }).collect();
        let pot: Vec<f64> = (0..2 * n + 1).map(|k| if k > n { -0.3 - 0.1 * (k % 3) as f64 } else { 0.0 }).collect();
        let snap = GeneratorSnapshot::from_positions(0.2, -(n as i64), &pos, rows, n as f64, pot).unwrap();
        let c = check_snapshot(snap.clone(), n, 1.5, 2, 1, 0).unwrap();
        let frozen = SnapshotPath::new(vec![snap]).unwrap();
        let mut explicit = f64::INFINITY;
        for k in n + 1..=2 * n {
            let mut vs = vec![vec![0.0; 2 * n + 1]];
            vs[0][k] = 1.0;
            for m in 1..=10 {
                propagate_many(&frozen, &mut vs, 0.2 + 0.15 * (m - 1) as f64, 0.2 + 0.15 * m as f64, 2, |_, _| {}).unwrap();
                explicit = explicit.min(vs[0].iter().sum());
            }
        }
        assert!((c.column_mass - explicit).abs() < 1e-12, "{} vs {explicit}", c.column_mass);
        assert!(c.l1 <= 1.0 + 1e-12 && c.l2 <= 1.0 + 1e-12 && c.linf <= 1.0 + 1e-12 && c.min_entry >= 0.0);
    }

    #[test]
    fn edge_law_of_point_mass() {
        let mut cfg = RunConfig::new(Experiment::EdgeLaw);
        cfg.n = 50;
        cfg.t = Some(1.0);
        cfg.t_sweep = vec![0.25];
        cfg.initial = "point-mass:0".parse().unwrap();
        let r = edge_law(&cfg).unwrap();
        assert!((r.rows[0].e_minus + 2.0).abs() < 1e-8 && (r.rows[0].gamma0 - 1.0).abs() < 1e-8);
        assert!((r.rows[1].e_minus + 1.0).abs() < 1e-8 && (r.rows[1].gamma0 - 2.0).abs() < 1e-8);
        assert!(r.verdicts().iter().all(|v| v.pass), "{:?}", r.verdicts());
    }
}
