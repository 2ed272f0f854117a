//! Flat `key = value` run configuration with a typed schema.
//!
//! Blank lines and `#` comments are ignored; keys accept `-` or `_`. Every
//! exponent is its own key so sweeps can be scripted line by line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dbm::topology::Exponents;
use crate::error::{Error, Result};
use crate::measure::{quantile_initial_data, DensitySpec, InitialData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    EdgeLaw,
    Regularity,
    Simulate,
    Universality,
    Couple,
    Rigidity,
    LocalLaw,
    ProbeFiniteSpeed,
    ProbeEnergy,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::EdgeLaw,
        Experiment::Regularity,
        Experiment::Simulate,
        Experiment::Universality,
        Experiment::Couple,
        Experiment::Rigidity,
        Experiment::LocalLaw,
        Experiment::ProbeFiniteSpeed,
        Experiment::ProbeEnergy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::EdgeLaw => "edge-law",
            Experiment::Regularity => "regularity",
            Experiment::Simulate => "simulate",
            Experiment::Universality => "universality",
            Experiment::Couple => "couple",
            Experiment::Rigidity => "rigidity",
            Experiment::LocalLaw => "local-law",
            Experiment::ProbeFiniteSpeed => "probe-finite-speed",
            Experiment::ProbeEnergy => "probe-energy",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('_', "-");
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Source of the initial data `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialSpec {
    Density(DensitySpec),
    /// Text file in the `InitialData` format.
    File(PathBuf),
}

impl InitialSpec {
    pub fn build(&self, n: usize) -> Result<InitialData> {
        match self {
            InitialSpec::Density(spec) => quantile_initial_data(spec, n),
            InitialSpec::File(path) => {
                let v = InitialData::from_text(&std::fs::read_to_string(path)?)?;
                if v.len() != n {
                    return Err(Error::Config(format!("{} holds N = {}, config says {n}", path.display(), v.len())));
                }
                Ok(v)
            }
        }
    }
}

impl fmt::Display for InitialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSpec::Density(DensitySpec::SqrtEdge { right }) => write!(f, "sqrt-edge:{right}"),
            InitialSpec::Density(DensitySpec::PointMass { at }) => write!(f, "point-mass:{at}"),
            InitialSpec::Density(DensitySpec::TwoPoint { left, right, left_weight }) => write!(f, "two-point:{left},{right},{left_weight}"),
            InitialSpec::Density(DensitySpec::Table { knots }) => {
                let parts: Vec<String> = knots.iter().map(|(x, y)| format!("{x},{y}")).collect();
                write!(f, "table:{}", parts.join(";"))
            }
            InitialSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for InitialSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s.split_once(':').ok_or_else(|| Error::Config(format!("initial {s:?} needs kind:args")))?;
        let nums = |a: &str| -> Result<Vec<f64>> {
            a.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number {x:?} in {s:?}")))).collect()
        };
        let spec = match kind.trim() {
            "sqrt-edge" => DensitySpec::SqrtEdge { right: one(&nums(arg)?, s)? },
            "point-mass" => DensitySpec::PointMass { at: one(&nums(arg)?, s)? },
            "two-point" => match nums(arg)?[..] {
                [left, right, left_weight] => DensitySpec::TwoPoint { left, right, left_weight },
                _ => return Err(Error::Config(format!("two-point takes left,right,weight: {s:?}"))),
            },
            "table" => {
                let knots = arg
                    .split(';')
                    .map(|k| match nums(k)?[..] {
                        [x, y] => Ok((x, y)),
                        _ => Err(Error::Config(format!("table knot {k:?} is not x,F"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                DensitySpec::Table { knots }
            }
            "file" => return Ok(InitialSpec::File(PathBuf::from(arg.trim()))),
            other => return Err(Error::Config(format!("unknown initial kind {other:?}"))),
        };
        Ok(InitialSpec::Density(spec))
    }
}

fn one(v: &[f64], s: &str) -> Result<f64> {
    match v {
        [x] => Ok(*x),
        _ => Err(Error::Config(format!("expected one number in {s:?}"))),
    }
}

/// Route used by `simulate`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Route {
    Matrix,
    Sde,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub n: usize,
    /// Time of the flow; `t_factor` (times `sqrt(eta_*)`) is used when absent.
    pub t: Option<f64>,
    pub t_factor: Option<f64>,
    /// Extra times for `edge-law` tables and `universality` trend sweeps.
    pub t_sweep: Vec<f64>,
    /// Control time factor (times `sqrt(eta_*)`) for `universality`.
    pub control_factor: Option<f64>,
    pub eta_star: Option<f64>,
    /// `eta_* = N^{-phi_star}` when `eta_star` is absent.
    pub phi_star: f64,
    pub trials: usize,
    pub baseline_trials: Option<usize>,
    /// Statistics `j = 0..=k` per trial.
    pub k: usize,
    pub initial: InitialSpec,
    pub omega1: f64,
    pub omega_ell: f64,
    pub omega_a: f64,
    pub omega0: f64,
    pub margin: f64,
    pub sigma: f64,
    /// Finite-speed barrier: `a <= N^{3 omega_ell + delta}/2`, `b >= N^{3 omega_ell + delta + epsilon}`.
    pub delta: f64,
    pub epsilon: f64,
    pub ks_tol: f64,
    pub gap_tol: f64,
    pub se_tol: f64,
    /// Rigidity envelope `rigidity_constant * log N`.
    pub rigidity_constant: f64,
    /// Indices `i <= rigidity_fraction * N` are tested.
    pub rigidity_fraction: f64,
    pub rigidity_level: f64,
    /// Local-law envelope `local_law_constant * log N` on the sup-ratio quantile.
    pub local_law_constant: f64,
    pub local_law_level: f64,
    pub ll_e_points: usize,
    pub ll_eta_points: usize,
    pub ll_right_extent: f64,
    pub ll_left_extent: f64,
    pub ll_eta_max: f64,
    pub ll_edge_shift: f64,
    /// Required shrink factor of the median coupled difference from `0` to `t_1`.
    pub contraction_ratio: f64,
    /// Base steps of the coupled integration per `t_1`.
    pub couple_steps: u64,
    /// Coupled horizon in units of `t_1`.
    pub couple_horizon: f64,
    pub regularity_constant: f64,
    pub grid_density: usize,
    pub c_v: f64,
    /// Generator path snapshots per `t_1`.
    pub snapshots_per_t1: usize,
    pub substeps: usize,
    pub fs_cross_max: f64,
    pub fs_adjacent_min: f64,
    pub energy_p: f64,
    /// Energy-fit window in units of `t_1`; the lower end defaults to `N^{-1/3}/t_1`.
    pub energy_t_min: Option<f64>,
    pub energy_t_max: f64,
    pub energy_points: usize,
    /// `eta` of the decay exponent `3 (1 - 6 eta) / p`.
    pub energy_eta: f64,
    pub energy_slack: f64,
    /// Frozen snapshots for the semigroup checks of `probe-energy` (0 disables).
    pub semigroup_snapshots: usize,
    pub semigroup_n: usize,
    pub route: Route,
    pub dt_max: f64,
    pub master_seed: u64,
    pub workers: usize,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn new(experiment: Experiment) -> Self {
        let e = Exponents::default();
        Self {
            experiment,
            n: 400,
            t: None,
            t_factor: None,
            t_sweep: Vec::new(),
            control_factor: None,
            eta_star: None,
            phi_star: 0.55,
            trials: 100,
            baseline_trials: None,
            k: 2,
            initial: InitialSpec::Density(DensitySpec::SqrtEdge { right: 1.0 }),
            omega1: e.omega1,
            omega_ell: e.omega_ell,
            omega_a: e.omega_a,
            omega0: e.omega0,
            margin: e.margin,
            sigma: 0.1,
            delta: 0.05,
            epsilon: 0.45,
            ks_tol: 0.05,
            gap_tol: 0.05,
            se_tol: 0.02,
            rigidity_constant: 5.0,
            rigidity_fraction: 0.25,
            rigidity_level: 0.95,
            local_law_constant: 10.0,
            local_law_level: 0.95,
            ll_e_points: 25,
            ll_eta_points: 10,
            ll_right_extent: 1.0,
            ll_left_extent: 1.0,
            ll_eta_max: 1.0,
            ll_edge_shift: 0.0,
            contraction_ratio: 1.0 / 3.0,
            couple_steps: 64,
            couple_horizon: 1.0,
            regularity_constant: crate::measure::DEFAULT_REGULARITY_CONSTANT,
            grid_density: 16,
            c_v: 1.0,
            snapshots_per_t1: 8,
            substeps: crate::dbm::generator::DEFAULT_SUBSTEPS,
            fs_cross_max: 1e-6,
            fs_adjacent_min: 1e-3,
            energy_p: 2.0,
            energy_t_min: None,
            energy_t_max: 2.0,
            energy_points: 9,
            energy_eta: 0.05,
            energy_slack: 0.3,
            semigroup_snapshots: 0,
            semigroup_n: 300,
            route: Route::Matrix,
            dt_max: 1e-3,
            master_seed: 0,
            workers: 1,
            out_dir: PathBuf::from("runs"),
        }
    }

    pub fn exponents(&self) -> Exponents {
        Exponents { omega1: self.omega1, omega_ell: self.omega_ell, omega_a: self.omega_a, omega0: self.omega0, margin: self.margin }
    }

    pub fn eta_star(&self) -> f64 {
        self.eta_star.unwrap_or_else(|| (self.n as f64).powf(-self.phi_star))
    }

    /// `t`, or `t_factor sqrt(eta_*)`.
    pub fn time(&self) -> Result<f64> {
        match (self.t, self.t_factor) {
            (Some(t), _) => Ok(t),
            (None, Some(c)) => Ok(c * self.eta_star().sqrt()),
            (None, None) => Err(Error::Config(format!("{} needs t or t_factor", self.experiment))),
        }
    }

    pub fn baseline_trials(&self) -> usize {
        self.baseline_trials.unwrap_or(self.trials)
    }

    /// Checks ranges; returns warnings that do not stop a run.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if self.n < 2 {
            return bad("n must be at least 2");
        }
        if self.trials == 0 || self.baseline_trials() == 0 || self.workers == 0 {
            return bad("trials, baseline_trials and workers must be positive");
        }
        for (name, x) in [
            ("phi_star", self.phi_star),
            ("sigma", self.sigma),
            ("ks_tol", self.ks_tol),
            ("gap_tol", self.gap_tol),
            ("se_tol", self.se_tol),
            ("rigidity_constant", self.rigidity_constant),
            ("rigidity_fraction", self.rigidity_fraction),
            ("local_law_constant", self.local_law_constant),
            ("contraction_ratio", self.contraction_ratio),
            ("couple_horizon", self.couple_horizon),
            ("regularity_constant", self.regularity_constant),
            ("c_v", self.c_v),
            ("fs_cross_max", self.fs_cross_max),
            ("fs_adjacent_min", self.fs_adjacent_min),
            ("energy_p", self.energy_p),
            ("energy_t_max", self.energy_t_max),
            ("dt_max", self.dt_max),
            ("delta", self.delta),
            ("epsilon", self.epsilon),
        ] {
            if !(x > 0.0 && x.is_finite()) {
                return bad(&format!("{name} = {x} must be positive"));
            }
        }
        for (name, x) in [("rigidity_level", self.rigidity_level), ("local_law_level", self.local_law_level)] {
            if !(x > 0.0 && x <= 1.0) {
                return bad(&format!("{name} = {x} must lie in (0, 1]"));
            }
        }
        for x in self.t.iter().chain(self.t_factor.iter()).chain(self.eta_star.iter()).chain(&self.t_sweep) {
            if !(*x > 0.0 && x.is_finite()) {
                return bad(&format!("times and eta_star must be positive, got {x}"));
            }
        }
        if self.rigidity_fraction > 1.0 {
            return bad("rigidity_fraction must not exceed 1");
        }
        if self.couple_steps == 0 || self.snapshots_per_t1 == 0 || self.substeps == 0 || self.energy_points < 2 {
            return bad("couple_steps, snapshots_per_t1, substeps must be positive and energy_points at least 2");
        }
        if matches!(self.experiment, Experiment::Couple | Experiment::ProbeFiniteSpeed | Experiment::ProbeEnergy) {
            self.exponents().validate()?;
        }
        let mut warnings = Vec::new();
        if self.experiment == Experiment::Universality {
            let t = self.time()?;
            let root = self.eta_star().sqrt();
            if t < root || t > 1.0 {
                warnings.push(format!("t = {t} lies outside the window sqrt(eta_*) = {root} <= t <= 1"));
            }
        }
        Ok(warnings)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut experiment = None;
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = k.trim().replace('-', "_");
            let value = v.trim().to_string();
            if key == "experiment" {
                experiment = Some(value.parse::<Experiment>()?);
            } else {
                pairs.push((lineno + 1, key, value));
            }
        }
        let experiment = experiment.ok_or_else(|| Error::Config("missing experiment".into()))?;
        let mut cfg = Self::new(experiment);
        for (lineno, key, value) in pairs {
            cfg.set(&key, &value).map_err(|e| Error::Config(format!("line {lineno}: {e}")))?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
        }
        fn opt(key: &str, v: &str) -> Result<Option<f64>> {
            if v == "none" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let key = key.replace('-', "_");
        let k = key.as_str();
        match k {
            "experiment" => self.experiment = value.parse()?,
            "n" => self.n = num(k, value)?,
            "t" => self.t = opt(k, value)?,
            "t_factor" => self.t_factor = opt(k, value)?,
            "t_sweep" => {
                self.t_sweep = if value.is_empty() { Vec::new() } else { value.split(',').map(|x| num(k, x.trim())).collect::<Result<_>>()? }
            }
            "control_factor" => self.control_factor = opt(k, value)?,
            "eta_star" => self.eta_star = opt(k, value)?,
            "phi_star" => self.phi_star = num(k, value)?,
            "trials" => self.trials = num(k, value)?,
            "baseline_trials" => self.baseline_trials = if value == "none" { None } else { Some(num(k, value)?) },
            "k" => self.k = num(k, value)?,
            "initial" => self.initial = value.parse()?,
            "omega1" => self.omega1 = num(k, value)?,
            "omega_ell" => self.omega_ell = num(k, value)?,
            "omega_a" => self.omega_a = num(k, value)?,
            "omega0" => self.omega0 = num(k, value)?,
            "margin" => self.margin = num(k, value)?,
            "sigma" => self.sigma = num(k, value)?,
            "delta" => self.delta = num(k, value)?,
            "epsilon" => self.epsilon = num(k, value)?,
            "ks_tol" => self.ks_tol = num(k, value)?,
            "gap_tol" => self.gap_tol = num(k, value)?,
            "se_tol" => self.se_tol = num(k, value)?,
            "rigidity_constant" => self.rigidity_constant = num(k, value)?,
            "rigidity_fraction" => self.rigidity_fraction = num(k, value)?,
            "rigidity_level" => self.rigidity_level = num(k, value)?,
            "local_law_constant" => self.local_law_constant = num(k, value)?,
            "local_law_level" => self.local_law_level = num(k, value)?,
            "ll_e_points" => self.ll_e_points = num(k, value)?,
            "ll_eta_points" => self.ll_eta_points = num(k, value)?,
            "ll_right_extent" => self.ll_right_extent = num(k, value)?,
            "ll_left_extent" => self.ll_left_extent = num(k, value)?,
            "ll_eta_max" => self.ll_eta_max = num(k, value)?,
            "ll_edge_shift" => self.ll_edge_shift = num(k, value)?,
            "contraction_ratio" => self.contraction_ratio = num(k, value)?,
            "couple_steps" => self.couple_steps = num(k, value)?,
            "couple_horizon" => self.couple_horizon = num(k, value)?,
            "regularity_constant" => self.regularity_constant = num(k, value)?,
            "grid_density" => self.grid_density = num(k, value)?,
            "c_v" => self.c_v = num(k, value)?,
            "snapshots_per_t1" => self.snapshots_per_t1 = num(k, value)?,
            "substeps" => self.substeps = num(k, value)?,
            "fs_cross_max" => self.fs_cross_max = num(k, value)?,
            "fs_adjacent_min" => self.fs_adjacent_min = num(k, value)?,
            "energy_p" => self.energy_p = num(k, value)?,
            "energy_t_min" => self.energy_t_min = opt(k, value)?,
            "energy_t_max" => self.energy_t_max = num(k, value)?,
            "energy_points" => self.energy_points = num(k, value)?,
            "energy_eta" => self.energy_eta = num(k, value)?,
            "energy_slack" => self.energy_slack = num(k, value)?,
            "semigroup_snapshots" => self.semigroup_snapshots = num(k, value)?,
            "semigroup_n" => self.semigroup_n = num(k, value)?,
            "route" => {
                self.route = match value {
                    "matrix" => Route::Matrix,
                    "sde" => Route::Sde,
                    _ => return Err(Error::Config(format!("route {value:?} is not matrix or sde"))),
                }
            }
            "dt_max" => self.dt_max = num(k, value)?,
            "master_seed" => self.master_seed = num(k, value)?,
            "workers" => self.workers = num(k, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Canonical text form; `parse(to_text())` returns an equal config.
    pub fn to_text(&self) -> String {
        let o = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:?}"));
        let sweep: Vec<String> = self.t_sweep.iter().map(|x| format!("{x:?}")).collect();
        let lines = [
            format!("experiment = {}", self.experiment),
            format!("n = {}", self.n),
            format!("t = {}", o(self.t)),
            format!("t_factor = {}", o(self.t_factor)),
            format!("t_sweep = {}", sweep.join(",")),
            format!("control_factor = {}", o(self.control_factor)),
            format!("eta_star = {}", o(self.eta_star)),
            format!("phi_star = {:?}", self.phi_star),
            format!("trials = {}", self.trials),
            format!("baseline_trials = {}", self.baseline_trials.map_or("none".into(), |b| b.to_string())),
            format!("k = {}", self.k),
            format!("initial = {}", self.initial),
            format!("omega1 = {:?}", self.omega1),
            format!("omega_ell = {:?}", self.omega_ell),
            format!("omega_a = {:?}", self.omega_a),
            format!("omega0 = {:?}", self.omega0),
            format!("margin = {:?}", self.margin),
            format!("sigma = {:?}", self.sigma),
            format!("delta = {:?}", self.delta),
            format!("epsilon = {:?}", self.epsilon),
            format!("ks_tol = {:?}", self.ks_tol),
            format!("gap_tol = {:?}", self.gap_tol),
            format!("se_tol = {:?}", self.se_tol),
            format!("rigidity_constant = {:?}", self.rigidity_constant),
            format!("rigidity_fraction = {:?}", self.rigidity_fraction),
            format!("rigidity_level = {:?}", self.rigidity_level),
            format!("local_law_constant = {:?}", self.local_law_constant),
            format!("local_law_level = {:?}", self.local_law_level),
            format!("ll_e_points = {}", self.ll_e_points),
            format!("ll_eta_points = {}", self.ll_eta_points),
            format!("ll_right_extent = {:?}", self.ll_right_extent),
            format!("ll_left_extent = {:?}", self.ll_left_extent),
            format!("ll_eta_max = {:?}", self.ll_eta_max),
            format!("ll_edge_shift = {:?}", self.ll_edge_shift),
            format!("contraction_ratio = {:?}", self.contraction_ratio),
            format!("couple_steps = {}", self.couple_steps),
            format!("couple_horizon = {:?}", self.couple_horizon),
            format!("regularity_constant = {:?}", self.regularity_constant),
            format!("grid_density = {}", self.grid_density),
            format!("c_v = {:?}", self.c_v),
            format!("snapshots_per_t1 = {}", self.snapshots_per_t1),
            format!("substeps = {}", self.substeps),
            format!("fs_cross_max = {:?}", self.fs_cross_max),
            format!("fs_adjacent_min = {:?}", self.fs_adjacent_min),
            format!("energy_p = {:?}", self.energy_p),
            format!("energy_t_min = {}", o(self.energy_t_min)),
            format!("energy_t_max = {:?}", self.energy_t_max),
            format!("energy_points = {}", self.energy_points),
            format!("energy_eta = {:?}", self.energy_eta),
            format!("energy_slack = {:?}", self.energy_slack),
            format!("semigroup_snapshots = {}", self.semigroup_snapshots),
            format!("semigroup_n = {}", self.semigroup_n),
            format!("route = {}", if self.route == Route::Matrix { "matrix" } else { "sde" }),
            format!("dt_max = {:?}", self.dt_max),
            format!("master_seed = {}", self.master_seed),
            format!("workers = {}", self.workers),
            format!("out_dir = {}", self.out_dir.display()),
        ];
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_aliases() {
        let cfg = RunConfig::parse("# edge run\nexperiment = edge-law\nn = 1000  # particles\nt-sweep = 0.5, 1\ninitial = point-mass:0\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::EdgeLaw);
        assert_eq!(cfg.n, 1000);
        assert_eq!(cfg.t_sweep, vec![0.5, 1.0]);
        assert_eq!(cfg.initial, InitialSpec::Density(DensitySpec::PointMass { at: 0.0 }));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(RunConfig::parse("experiment = rigidity\nbogus = 1\n").is_err());
        assert!(RunConfig::parse("experiment = rigidity\nn = many\n").is_err());
        assert!(RunConfig::parse("n = 3\n").is_err());
        assert!(RunConfig::parse("experiment = nothing\n").is_err());
        let cfg = RunConfig::parse("experiment = rigidity\nn = 1\n").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = RunConfig::new(Experiment::Universality);
        cfg.t_factor = Some(3.0);
        cfg.control_factor = Some(0.3);
        cfg.t_sweep = vec![0.1, 0.2];
        cfg.initial = "two-point:-1,1,0.25".parse().unwrap();
        cfg.baseline_trials = Some(17);
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        let table: InitialSpec = "table:0,0;1,1".parse().unwrap();
        assert_eq!(table.to_string().parse::<InitialSpec>().unwrap(), table);
    }

    #[test]
    fn exponent_hierarchy_is_checked_for_dynamics() {
        let mut cfg = RunConfig::new(Experiment::Couple);
        cfg.omega_a = 0.45;
        assert!(matches!(cfg.validate(), Err(Error::BadHierarchy(_))));
    }

    #[test]
    fn universality_window_warns() {
        let mut cfg = RunConfig::new(Experiment::Universality);
        cfg.t_factor = Some(0.3);
        let w = cfg.validate().unwrap();
        assert_eq!(w.len(), 1);
        cfg.t_factor = Some(3.0);
        assert!(cfg.validate().unwrap().is_empty());
    }
}
