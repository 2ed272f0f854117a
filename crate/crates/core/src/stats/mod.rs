//! Monte Carlo verdicts on sampled spectra: rescaled edge statistics and
//! two-sample comparisons, rigidity and local-law envelopes.

pub mod compare;
pub mod local_law;
pub mod rigidity;
pub mod samples;

pub use compare::{default_test_functions, ks_distance, two_sample_compare, ComparisonReport, CompareTolerances, GapEstimate, TestFunction};
pub use local_law::{local_law_report, LocalLawGrid, LocalLawReport, LocalLawSide};
pub use rigidity::{rigidity_report, RigidityReport};
pub use samples::{ecdf, rescaled_edge_statistics, Ecdf, EdgeSampleSet, SampleMeta};

/// Empirical `q`-quantile (lower order statistic at `ceil(q M)`).
pub fn empirical_quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[k - 1]
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_and_median() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(median(&v), 3.0);
        assert_eq!(median(&[1.0, 2.0]), 1.5);
        assert_eq!(empirical_quantile(&v, 0.95), 5.0);
        assert_eq!(empirical_quantile(&v, 0.2), 1.0);
        assert!(median(&[]).is_nan());
    }
}
