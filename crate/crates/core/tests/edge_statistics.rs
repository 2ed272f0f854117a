//! Monte Carlo oracles for the edge-statistics layer.

use dbm_edge::dbm::ensemble_eigenvalues;
use dbm_edge::free_conv::{quantiles_with, FreeConvolutionProfile};
use dbm_edge::harness::pipelines::{goe_baseline, local_law, universality};
use dbm_edge::harness::{Experiment, RunConfig};
use dbm_edge::measure::InitialData;
use dbm_edge::rng::{derive_stream, Role};
use dbm_edge::stats::{ks_distance, median, rigidity_report};

#[test]
fn goe_first_statistic_mean() {
    // N^{2/3} (mu_1 + 2) is minus the largest-eigenvalue Tracy-Widom variable, mean about +1.21
    let b = goe_baseline(400, 0, 4000, 21, 1).unwrap();
    let x = b.coordinate(0);
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    assert!((1.05..=1.35).contains(&mean), "mean {mean}");
}

#[test]
fn independent_goe_baselines_agree() {
    let a = goe_baseline(400, 2, 4000, 31, 1).unwrap();
    let b = goe_baseline(400, 2, 4000, 32, 1).unwrap();
    for j in 0..3 {
        let d = ks_distance(&a.coordinate(j), &b.coordinate(j));
        assert!(d <= 0.05, "KS[{j}] = {d}");
    }
}

#[test]
fn universality_pipeline_shapes() {
    // too few trials at this size to resolve the control; the trend is checked at N = 400 in acceptance
    let mut cfg = RunConfig::new(Experiment::Universality);
    cfg.n = 200;
    cfg.trials = 300;
    cfg.baseline_trials = Some(300);
    cfg.t_factor = Some(5.0);
    cfg.control_factor = Some(0.3);
    cfg.master_seed = 41;
    let run = universality(&cfg).unwrap();
    let r = &run.result;
    assert_eq!(r.report.ks.len(), 3);
    assert_eq!(r.report.fgaps.len(), 3 + 1 + 4);
    assert_eq!((run.a.trials(), run.b.trials()), (300, 300));
    let control = r.control.as_ref().unwrap();
    assert!(control.ks.iter().chain(&r.report.ks).all(|d| (0.0..=1.0).contains(d)));
    assert!(r.control_t.unwrap() < r.t);
}

#[test]
fn shifted_quantiles_are_detected_away_from_the_edge() {
    // a rigid shift by c N^{-2/3} adds c i^{1/3} to the normalised deviation at index i
    let n = 300;
    let v = InitialData::point_mass(n, 0.0);
    let p = FreeConvolutionProfile::compute(&v, 1.0).unwrap();
    let idx: Vec<usize> = (1..=n / 4).collect();
    let q = quantiles_with(v.values(), &p, &idx).unwrap();
    let shifted: Vec<f64> = q.iter().map(|g| g + 3.0 * (n as f64).powf(-2.0 / 3.0)).collect();
    let spectra: Vec<Vec<f64>> = (0..20).map(|m| ensemble_eigenvalues(&v, 1.0, &derive_stream(51, m, Role::Matrix)).unwrap()).collect();
    let plain = rigidity_report(&spectra, &q, 1, f64::INFINITY);
    let moved = rigidity_report(&spectra, &shifted, 1, f64::INFINITY);
    let where_moved: Vec<f64> = moved.per_trial_argmax.iter().map(|&i| i as f64).collect();
    assert!(median(&where_moved) >= (n / 8) as f64, "argmax {:?}", moved.per_trial_argmax);
    assert!(median(&moved.per_trial_max) > median(&plain.per_trial_max) + 3.0);
}

#[test]
fn local_law_ratio_grows_when_the_envelope_is_miscentred() {
    let mut cfg = RunConfig::new(Experiment::LocalLaw);
    cfg.n = 300;
    cfg.t = Some(1.0);
    cfg.initial = "point-mass:0".parse().unwrap();
    cfg.trials = 10;
    cfg.ll_e_points = 8;
    cfg.ll_eta_points = 5;
    cfg.master_seed = 61;
    let centred = local_law(&cfg).unwrap();
    cfg.ll_edge_shift = 1.0; // t^2
    let shifted = local_law(&cfg).unwrap();
    assert!(shifted.report.left.quantile > centred.report.left.quantile);
    assert_eq!(shifted.report.right.quantile, centred.report.right.quantile);
}

#[test]
fn doubling_eta_does_not_grow_the_worst_deviation() {
    use dbm_edge::stats::local_law::empirical_stieltjes;
    use num_complex::Complex64;
    // m_N - m_sc is analytic in the upper half plane, so at height 2 eta it is a
    // Poisson average of its values at height eta and the sup over E cannot grow
    let n = 300;
    let v = InitialData::point_mass(n, 0.0);
    let sc = |z: Complex64| {
        let r = (z * z - 4.0).sqrt();
        let m = (-z + r) / 2.0;
        if m.im > 0.0 { m } else { (-z - r) / 2.0 }
    };
    let mut worst: f64 = 0.0;
    for trial in 0..5 {
        let s = ensemble_eigenvalues(&v, 1.0, &derive_stream(71, trial, Role::Matrix)).unwrap();
        let sup = |eta: f64| {
            (0..=700)
                .map(|k| {
                    let z = Complex64::new(-3.5 + 0.01 * k as f64, eta);
                    (empirical_stieltjes(&s, z) - sc(z)).norm()
                })
                .fold(0.0, f64::max)
        };
        for eta in [0.05, 0.1, 0.2, 0.4] {
            worst = worst.max(sup(2.0 * eta) / sup(eta));
        }
    }
    assert!(worst <= 4.0, "worst ratio {worst}");
}
