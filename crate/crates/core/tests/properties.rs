use dbm_edge::free_conv::FreeConvolutionProfile;
use dbm_edge::harness::{Experiment, RunConfig};
use dbm_edge::measure::{quantile_initial_data, DensitySpec, InitialData};
use dbm_edge::stats::{ecdf, rigidity_report, EdgeSampleSet, SampleMeta};
use proptest::prelude::*;

fn meta() -> SampleMeta {
    SampleMeta { n: 10, t: 0.5, v_fingerprint: "x".into(), gamma0: 1.0, e_minus: -2.0, i0: 1, master_seed: 0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn edge_scales_covariantly(n in 40usize..160, right in 0.5f64..2.0, shift in 0.0f64..0.3, t in 0.05f64..0.8, gamma in 0.3f64..3.0) {
        let base = quantile_initial_data(&DensitySpec::SqrtEdge { right }, n).unwrap();
        let v = InitialData::with_auto_norm(base.values().iter().map(|x| x + shift).collect()).unwrap();
        let p = FreeConvolutionProfile::compute(&v, t).unwrap();
        let q = FreeConvolutionProfile::compute(&v.scaled(gamma).unwrap(), gamma * gamma * t).unwrap();
        prop_assert!((q.e_minus / (gamma * p.e_minus) - 1.0).abs() < 1e-7);
        prop_assert!((q.gamma0 * gamma / p.gamma0 - 1.0).abs() < 1e-7);
    }
}

proptest! {
    #[test]
    fn rigidity_is_translation_invariant(
        rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 12), 1..6),
        c in -1.0f64..1.0,
    ) {
        let spectra: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.sort_by(f64::total_cmp); r }).collect();
        let q: Vec<f64> = (0..8).map(|i| -2.0 + 0.3 * i as f64).collect();
        let moved: Vec<Vec<f64>> = spectra.iter().map(|s| s.iter().map(|x| x + c).collect()).collect();
        let qm: Vec<f64> = q.iter().map(|x| x + c).collect();
        let a = rigidity_report(&spectra, &q, 2, 5.0);
        let b = rigidity_report(&moved, &qm, 2, 5.0);
        for (x, y) in a.per_trial_max.iter().zip(&b.per_trial_max) {
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn ecdf_quantile_inverts(xs in prop::collection::vec(-5.0f64..5.0, 1..60), p in 0.001f64..1.0) {
        let f = ecdf(&xs).unwrap();
        let x = f.quantile(p);
        prop_assert!(f.eval(x) >= p - 1e-12);
        prop_assert!(xs.contains(&x));
        let below = xs.iter().filter(|&&y| y < x).count() as f64 / xs.len() as f64;
        prop_assert!(below < p + 1e-12);
        prop_assert_eq!(f.eval(f64::INFINITY), 1.0);
    }

    #[test]
    fn sample_csv_round_trips(rows in prop::collection::vec(prop::collection::vec(-4.0f64..4.0, 3), 1..20)) {
        let rows: Vec<Vec<f64>> = rows.into_iter().map(|mut r| { r.sort_by(f64::total_cmp); r }).collect();
        let set = EdgeSampleSet::new(rows, meta()).unwrap();
        let back = EdgeSampleSet::from_csv(&set.to_csv(), meta()).unwrap();
        prop_assert_eq!(back, set);
    }

    #[test]
    fn config_text_round_trips(n in 1usize..5000, trials in 1usize..1000, seed in any::<u64>(), t in 1e-3f64..2.0, ks in 0.001f64..0.5) {
        let mut cfg = RunConfig::new(Experiment::Universality);
        cfg.n = n;
        cfg.trials = trials;
        cfg.master_seed = seed;
        cfg.t = Some(t);
        cfg.ks_tol = ks;
        let back = RunConfig::parse(&cfg.to_text()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
