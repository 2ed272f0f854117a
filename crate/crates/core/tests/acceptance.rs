//! Acceptance suite: criteria 1 to 10, one PASS/FAIL line each.
//!
//! Runs without the libtest harness so the lines always print. Positional
//! arguments select criteria by number, e.g.
//! `cargo test --test acceptance -- 4 7`.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use dbm_edge::dbm::generator::loglog_fit;
use dbm_edge::free_conv::{density, FreeConvolutionProfile};
use dbm_edge::harness::pipelines::{self, Verdict};
use dbm_edge::harness::{Experiment, RunConfig};
use dbm_edge::measure::{quantile_initial_data, DensitySpec, InitialData};
use dbm_edge::rng::{derive_stream, Role};
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn failed_names(vs: &[Verdict]) -> String {
    let names: Vec<&str> = vs.iter().filter(|v| !v.pass).map(|v| v.name.as_str()).collect();
    if names.is_empty() {
        String::new()
    } else {
        format!("; failed: {}", names.join(", "))
    }
}

fn within_budget(start: Instant, budget: f64) -> (bool, String) {
    let s = start.elapsed().as_secs_f64();
    (s < budget, format!("{s:.1} s of {budget} s"))
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let v = InitialData::point_mass(1, 0.0);
    let p = FreeConvolutionProfile::compute(&v, 1.0).unwrap();
    let rho0 = density(&v, 1.0, 0.0).unwrap();
    let q = FreeConvolutionProfile::compute(&v, 0.25).unwrap();
    let errs = [
        (p.e_minus + 2.0).abs() <= 1e-10,
        (p.xi_minus + 1.0).abs() <= 1e-10,
        (p.gamma0 - 1.0).abs() <= 1e-8,
        (rho0 - 1.0 / PI).abs() <= 1e-6,
        (q.e_minus + 1.0).abs() <= 1e-10,
        (q.gamma0 - 2.0).abs() <= 1e-8,
    ];
    let (fast, time) = within_budget(start, 1.0);
    Outcome {
        pass: errs.iter().all(|&b| b) && fast,
        detail: format!(
            "E_- = {:.12}, xi_- = {:.12}, gamma_0 = {:.10}, rho(0) - 1/pi = {:.1e}; t = 1/4: E_- = {:.12}, gamma_0 = {:.10}; {time}",
            p.e_minus,
            p.xi_minus,
            p.gamma0,
            rho0 - 1.0 / PI,
            q.e_minus,
            q.gamma0
        ),
    }
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = derive_stream(2, 0, Role::Auxiliary).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.gen_range(50..400);
        let right = rng.gen_range(0.5..2.0);
        let shift = rng.gen_range(0.0..0.3);
        let base = quantile_initial_data(&DensitySpec::SqrtEdge { right }, n).unwrap();
        let v = InitialData::with_auto_norm(base.values().iter().map(|x| x + shift).collect()).unwrap();
        let t = rng.gen_range(0.05..1.0);
        let p = FreeConvolutionProfile::compute(&v, t).unwrap();
        for gamma in [0.5, 2.0] {
            let q = FreeConvolutionProfile::compute(&v.scaled(gamma).unwrap(), gamma * gamma * t).unwrap();
            worst = worst.max(((q.e_minus - gamma * p.e_minus) / (gamma * p.e_minus)).abs());
            worst = worst.max(((q.gamma0 - p.gamma0 / gamma) / (p.gamma0 / gamma)).abs());
        }
    }
    let (fast, time) = within_budget(start, 10.0);
    Outcome { pass: worst <= 1e-7 && fast, detail: format!("worst relative error {worst:.2e} (bound 1e-7); {time}") }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let v = quantile_initial_data(&DensitySpec::SqrtEdge { right: 1.0 }, 1000).unwrap();
    let t = 0.1;
    let p = FreeConvolutionProfile::compute(&v, t).unwrap();
    let kappas: Vec<f64> = (0..7).map(|k| 1e-7 * 10f64.powf(k as f64 / 2.0)).collect();
    let rho: Vec<f64> = kappas.iter().map(|k| density(&v, t, p.e_minus + k).unwrap()).collect();
    let (slope, _) = loglog_fit(&kappas, &rho);
    // in s = gamma_0 (x - E_-) the density is rho(E_- + s/gamma_0)/gamma_0 ~ c sqrt(s)
    let coeff = rho[0] / kappas[0].sqrt() * p.gamma0.powf(-1.5);
    let rel = (coeff * PI - 1.0).abs();
    let (fast, time) = within_budget(start, 30.0);
    Outcome {
        pass: (slope - 0.5).abs() <= 0.02 && rel <= 0.02 && fast,
        detail: format!("slope {slope:.4} (0.5 +- 0.02), pi * coefficient = {:.5} (within 2% of 1); {time}", coeff * PI),
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::Universality);
    cfg.n = 400;
    cfg.phi_star = 0.55;
    cfg.t_factor = Some(3.0);
    cfg.control_factor = Some(0.3);
    cfg.trials = 4000;
    cfg.baseline_trials = Some(4000);
    cfg.k = 2;
    cfg.master_seed = 4;
    let run = pipelines::universality(&cfg).unwrap();
    let r = &run.result;
    let vs = r.verdicts();
    let max_gap = r.report.fgaps.values().map(|g| g.gap).fold(0.0, f64::max);
    let max_se = r.report.fgaps.values().map(|g| g.se).fold(0.0, f64::max);
    let ks: Vec<String> = r.report.ks.iter().map(|d| format!("{d:.4}")).collect();
    let control = r.control.as_ref().map_or(f64::NAN, |c| c.ks[0]);
    Outcome {
        pass: vs.iter().all(|v| v.pass),
        detail: format!(
            "t = {:.4}: KS [{}] (<= 0.05), max gap {max_gap:.4} (<= 0.05), max SE {max_se:.4} (<= 0.02); control t = {:.4}: KS[0] = {control:.4}{}; {:.0} s",
            r.t,
            ks.join(", "),
            r.control_t.unwrap_or(f64::NAN),
            failed_names(&vs),
            start.elapsed().as_secs_f64()
        ),
    }
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::Rigidity);
    cfg.n = 1000;
    cfg.t = Some(1.0);
    cfg.initial = "point-mass:0".parse().unwrap();
    cfg.trials = 100;
    cfg.master_seed = 5;
    let r = pipelines::rigidity(&cfg).unwrap();
    let worst = r.report.per_trial_max.iter().copied().fold(0.0, f64::max);
    let (fast, time) = within_budget(start, 120.0);
    Outcome {
        pass: r.verdicts().iter().all(|v| v.pass) && fast,
        detail: format!(
            "{:.0}% of trials below 5 log N = {:.2} over i <= {} (need 95%), worst normalised deviation {worst:.2}; {time}",
            100.0 * r.report.fraction_below,
            r.report.envelope,
            r.report.indices
        ),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::LocalLaw);
    cfg.n = 2000;
    cfg.t = Some(1.0);
    cfg.initial = "point-mass:0".parse().unwrap();
    cfg.trials = 50;
    cfg.sigma = 0.1;
    cfg.master_seed = 6;
    let r = pipelines::local_law(&cfg).unwrap();
    let (fast, time) = within_budget(start, 300.0);
    Outcome {
        pass: r.verdicts().iter().all(|v| v.pass) && fast,
        detail: format!(
            "95th percentile sup-ratio: right {:.3}, left {:.3} (bound 10 log N = {:.2}); {time}",
            r.report.right.quantile, r.report.left.quantile, r.bound
        ),
    }
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::Couple);
    cfg.n = 500;
    cfg.trials = 40;
    cfg.master_seed = 7;
    let r = pipelines::couple(&cfg).unwrap();
    let vs = r.verdicts();
    let (fast, time) = within_budget(start, 600.0);
    Outcome {
        pass: vs.iter().all(|v| v.pass) && fast,
        detail: format!(
            "median |diff| {:.3e} at 0, {:.3e} at t_1 = {:.4}: ratio {:.3} (<= 1/3), N^(-2/3) = {:.3e}, largest increase {:.2e} (<= 0){}; {time}",
            r.medians[0],
            r.medians[r.t1_index],
            r.t1,
            r.ratio,
            500f64.powf(-2.0 / 3.0),
            r.largest_increase(),
            failed_names(&vs)
        ),
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::ProbeFiniteSpeed);
    cfg.n = 2000;
    cfg.trials = 1;
    cfg.master_seed = 8;
    let r = pipelines::probe_finite_speed(&cfg).unwrap();
    let vs = r.verdicts();
    let (fast, time) = within_budget(start, 120.0);
    Outcome {
        pass: vs.iter().all(|v| v.pass) && fast,
        detail: format!(
            "near {:?}, far {:?}: max U_ab + U_ba = {:.2e} (<= 1e-6), min adjacent entry at lag t_1 = {:.3e} (>= 1e-3){}; {time}",
            r.near,
            r.far,
            r.max_cross,
            r.min_adjacent,
            failed_names(&vs)
        ),
    }
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::ProbeEnergy);
    cfg.semigroup_snapshots = 200;
    cfg.semigroup_n = 300;
    cfg.master_seed = 9;
    let s = pipelines::semigroup_checks(&cfg).unwrap();
    let pass = s.checks.len() == 200 && s.max_ratio <= 1.0 + 1e-12 && s.min_entry >= 0.0 && s.min_random_mass >= 0.5;
    let (fast, time) = within_budget(start, 60.0);
    Outcome {
        pass: pass && fast,
        detail: format!(
            "{} snapshots at N = {}: max norm ratio {:.15}, min entry {:.2e}, min mass ratio over [0, 10 t_1] for uniform u {:.4} (>= 0.5); smallest column mass {:.4}; {time}",
            s.checks.len(),
            s.n,
            s.max_ratio,
            s.min_entry,
            s.min_random_mass,
            s.min_column_mass
        ),
    }
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let mut cfg = RunConfig::new(Experiment::ProbeEnergy);
    cfg.n = 2000;
    cfg.trials = 2;
    cfg.master_seed = 10;
    let r = pipelines::probe_energy(&cfg).unwrap();
    let (fast, time) = within_budget(start, 300.0);
    Outcome {
        pass: r.slope <= r.bound && fast,
        detail: format!(
            "slope {:.3} over [{:.4}, {:.4}] (95% CI [{:.3}, {:.3}]), bound {:.3}; slope over [t_1/8, t_1] {:.3}; {time}",
            r.slope, r.window.0, r.window.1, r.slope_ci.0, r.slope_ci.1, r.bound, r.short_window_slope
        ),
    }
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "point-mass oracle", criterion_1),
        (2, "scaling covariance", criterion_2),
        (3, "square-root edge and gamma_0 normalisation", criterion_3),
        (4, "edge universality", criterion_4),
        (5, "rigidity", criterion_5),
        (6, "local law", criterion_6),
        (7, "coupling contraction", criterion_7),
        (8, "finite speed", criterion_8),
        (9, "semigroup structure", criterion_9),
        (10, "energy decay regression", criterion_10),
    ];
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut all = true;
    for (id, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&id) {
            continue;
        }
        let o = f();
        all &= o.pass;
        println!("criterion {id:>2} {}: {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
